"""QUBO encoding of k-way modularity maximization.

Variables are one-hot group indicators ``x[i*k + c]``.  The objective is
minimized::

    energy(x) = x^T U x + b^T x + offset

with ``U`` upper triangular (diagonal included).  For binary ``x`` this is
the same as a symmetric ``Q = (U + U^T) / 2``; only ``U`` is stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import DENSE_THRESHOLD, Graph, Partition, modularity

VARIABLE_CAP = 20000


class OneHotViolation(ValueError):
    def __init__(self, node: int, hot: int):
        super().__init__(f"node {node} has {hot} active group variables (expected 1)")
        self.node = node
        self.hot = hot


@dataclass(frozen=True)
class PenaltyWeights:
    """Objective weights.

    ``w1`` scales the modularity term, ``lambda_a`` the one-hot penalty and
    ``lambda_s`` the group-size balance penalty.  ``w3`` is an optional bonus
    of ``-2*w3`` per intra-group edge (off by default).
    """

    w1: float = 1.0
    lambda_a: float = 1.0
    lambda_s: float = 0.0
    w3: float = 0.0

    def __post_init__(self):
        for name in ("w1", "lambda_a", "lambda_s", "w3"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def default_for(cls, g: Graph) -> "PenaltyWeights":
        # balance stays O(1/n^2) per squared size deviation so it cannot
        # outweigh the modularity term on skewed community sizes
        lam_a = 2.0 * g.degrees.max() / g.two_m + 1.0
        n = g.node_count
        return cls(w1=1.0, lambda_a=float(lam_a), lambda_s=0.5 / (n * n))


@dataclass(frozen=True, eq=False)
class QuboProblem:
    quadratic: sp.csr_matrix
    linear: np.ndarray
    offset: float = 0.0
    n: int = 0
    k: int = 1

    def __post_init__(self):
        u = sp.triu(sp.csr_matrix(self.quadratic, dtype=np.float64), format="csr")
        u.sum_duplicates()
        u.sort_indices()
        lin = np.ascontiguousarray(self.linear, dtype=np.float64)
        if u.shape != (lin.size, lin.size):
            raise ValueError(f"quadratic shape {u.shape} does not match linear size {lin.size}")
        if not (np.all(np.isfinite(u.data)) and np.all(np.isfinite(lin)) and math.isfinite(self.offset)):
            raise ValueError("QUBO coefficients must be finite")
        object.__setattr__(self, "quadratic", u)
        object.__setattr__(self, "linear", lin)
        if self.n == 0:
            object.__setattr__(self, "n", lin.size)
            object.__setattr__(self, "k", 1)
        if self.n * self.k != lin.size:
            raise ValueError(f"layout ({self.n}, {self.k}) does not match dim {lin.size}")

    @property
    def dim(self) -> int:
        return self.linear.size

    @property
    def layout(self) -> tuple[int, int]:
        return (self.n, self.k)

    @property
    def diagonal(self) -> np.ndarray:
        return self.quadratic.diagonal()

    @property
    def coupling(self) -> sp.csr_matrix:
        """``U + U^T`` with the diagonal removed: ``S[i, j]`` is the energy of
        having both ``x_i`` and ``x_j`` set, for ``i != j``."""
        c = self.__dict__.get("_coupling")
        if c is None:
            off = sp.triu(self.quadratic, k=1, format="csr")
            c = (off + off.T).tocsr()
            c.sort_indices()
            object.__setattr__(self, "_coupling", c)
        return c

    def local_fields(self) -> np.ndarray:
        """Per-variable energy of switching on one bit from all-zeros."""
        return self.diagonal + self.linear

    @classmethod
    def from_dense(cls, q: np.ndarray, b: np.ndarray | None = None, offset: float = 0.0) -> "QuboProblem":
        """Accepts any square ``q``; ``x^T q x`` is preserved (lower part folded up)."""
        q = np.asarray(q, dtype=np.float64)
        u = np.triu(q) + np.triu(q.T, k=1)
        b = np.zeros(q.shape[0]) if b is None else b
        return cls(sp.csr_matrix(u), np.asarray(b, dtype=np.float64), float(offset))

    def to_dense(self) -> np.ndarray:
        """Upper-triangular dense ``U``."""
        return self.quadratic.toarray()


def idx(i: int, c: int, k: int, n: int | None = None) -> int:
    if k < 1 or not 0 <= c < k or i < 0 or (n is not None and i >= n):
        raise IndexError(f"(node={i}, group={c}) out of range for k={k}, n={n}")
    return i * k + c


def unidx(v: int, k: int) -> tuple[int, int]:
    if v < 0 or k < 1:
        raise IndexError(f"variable {v} out of range")
    return divmod(v, k)


def build_qubo(
    g: Graph,
    k: int,
    weights: PenaltyWeights | None = None,
    variable_cap: int = VARIABLE_CAP,
    dense_threshold: int = DENSE_THRESHOLD,
) -> QuboProblem:
    """Minimization QUBO for ``-w1*Q_M + lambda_a*Q_A + lambda_s*Q_S (+ cut bonus)``.

    Constant parts of the expanded squared penalties go to ``offset``.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = g.node_count
    if n * k > variable_cap:
        raise ValueError(f"n*k = {n * k} exceeds the variable cap of {variable_cap}")
    if g.two_m <= 0:
        raise ValueError("cannot build a modularity QUBO for a graph with m = 0")
    weights = weights or PenaltyWeights.default_for(g)
    w1, lam_a, lam_s = weights.w1, weights.lambda_a, weights.lambda_s
    target = n / k

    bmat = g.modularity_matrix(dense_threshold).dense()
    # pair coefficient shared by every group c for node pair i<j
    pair = -w1 * bmat / (g.two_m / 2.0) + 2.0 * lam_s
    iu, ju = np.triu_indices(n, k=1)
    pv = pair[iu, ju]
    nz = pv != 0.0
    iu, ju, pv = iu[nz], ju[nz], pv[nz]
    cs = np.arange(k)
    rows = [(iu[:, None] * k + cs).ravel()]
    cols = [(ju[:, None] * k + cs).ravel()]
    vals = [np.repeat(pv, k)]

    if weights.w3:
        adj = sp.triu(g.adjacency, k=1, format="coo")
        eu = adj.row[:, None] * k + cs
        ev = adj.col[:, None] * k + cs
        rows.append(eu.ravel())
        cols.append(ev.ravel())
        vals.append(np.full(eu.size, -2.0 * weights.w3))

    if lam_a:
        c1, c2 = np.triu_indices(k, k=1)
        base = np.arange(n)[:, None] * k
        rows.append((base + c1).ravel())
        cols.append((base + c2).ravel())
        vals.append(np.full(n * c1.size, 2.0 * lam_a))

    node_lin = -w1 * np.diag(bmat) / g.two_m
    linear = np.repeat(node_lin, k) + (lam_s * (1.0 - 2.0 * target) - lam_a)
    offset = lam_a * n + lam_s * k * target * target

    dim = n * k
    u = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    return QuboProblem(u, linear, float(offset), n, k)


def _as_binary(q: QuboProblem, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != q.dim:
        raise ValueError(f"vector length {x.shape[-1]} does not match QUBO dim {q.dim}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("QUBO variables must be 0 or 1")
    return x.astype(np.float64)


def energy(q: QuboProblem, x) -> float:
    xf = _as_binary(q, x)
    if xf.ndim != 1:
        raise ValueError("energy() takes a single vector; use energies() for batches")
    return float(xf @ (q.quadratic @ xf) + q.linear @ xf + q.offset)


def energies(q: QuboProblem, xs) -> np.ndarray:
    """Row-wise energies of a 2-D array of binary vectors."""
    xf = _as_binary(q, xs)
    xf = np.atleast_2d(xf)
    return np.einsum("ij,ij->i", xf, (q.quadratic @ xf.T).T) + xf @ q.linear + q.offset


def decode_assignment(q: QuboProblem, x, repair: bool = True, graph: Graph | None = None) -> Partition:
    """Map a binary solution to a :class:`Partition`.

    With ``repair`` set, nodes with zero or several active groups are placed
    after all valid nodes, in node order, into the group (among their active
    ones, or any group if none) with the best modularity gain; ties go to the
    lowest group id.  Repair needs ``graph``.
    """
    n, k = q.layout
    xb = _as_binary(q, x).reshape(n, k)
    hot = xb.sum(axis=1)
    assign = np.where(hot == 1, xb.argmax(axis=1), -1)
    bad = np.flatnonzero(hot != 1)
    if bad.size == 0:
        return Partition(assign, k)
    if not repair:
        raise OneHotViolation(int(bad[0]), int(hot[bad[0]]))
    if graph is None:
        raise ValueError("repair requires the source graph")
    if graph.node_count != n:
        raise ValueError("graph does not match QUBO layout")
    a = graph.adjacency
    deg = graph.degrees
    placed = assign >= 0
    gdeg = np.bincount(assign[placed], weights=deg[placed], minlength=k)
    for i in bad:
        lo, hi = a.indptr[i], a.indptr[i + 1]
        nb, w = a.indices[lo:hi], a.data[lo:hi]
        ok = (nb != i) & (assign[nb] >= 0)
        kin = np.bincount(assign[nb[ok]], weights=w[ok], minlength=k)
        # gain of inserting an unplaced node into c, up to a c-independent constant
        gain = kin - deg[i] * gdeg / graph.two_m
        allowed = xb[i] > 0 if hot[i] > 1 else np.ones(k, dtype=bool)
        gain = np.where(allowed, gain, -np.inf)
        c = int(np.argmax(gain))
        assign[i] = c
        gdeg[c] += deg[i]
    return Partition(assign, k)


def encode_assignment(p: Partition) -> np.ndarray:
    x = np.zeros(len(p) * p.k, dtype=np.int8)
    x[np.arange(len(p)) * p.k + p.assignment] = 1
    return x


def partition_energy(g: Graph, p: Partition, weights: PenaltyWeights | None = None) -> float:
    """Energy of the one-hot encoding of ``p`` without building the QUBO.

    Equal to ``energy(build_qubo(g, p.k, weights), encode_assignment(p))``
    up to rounding; usable above the variable cap.
    """
    if len(p) != g.node_count:
        raise ValueError("partition does not match graph")
    weights = weights or PenaltyWeights.default_for(g)
    sizes = np.bincount(p.assignment, minlength=p.k).astype(np.float64)
    balance = math.fsum((sizes - g.node_count / p.k) ** 2)
    e = -weights.w1 * modularity(g, p) + weights.lambda_s * balance
    if weights.w3:
        adj = sp.triu(g.adjacency, k=1, format="coo")
        same = p.assignment[adj.row] == p.assignment[adj.col]
        e -= 2.0 * weights.w3 * int(np.count_nonzero(same))
    return float(e)


# -- serialization ------------------------------------------------------------

def write_coo(q: QuboProblem, path, fold_linear: bool = False):
    """Sparse text format.

    ``c`` lines are comments; ``c offset <v>`` and ``c layout <n> <k>`` carry
    metadata.  The header is ``p qubo <dim> <nnz>`` followed by ``i j val``
    lines with ``i <= j`` meaning ``val * x_i * x_j``.  With ``fold_linear``
    the linear term is added onto the diagonal lines (exact in energy since
    ``x_i^2 = x_i``, not bit-exact in coefficients); otherwise linear terms
    are separate ``b i val`` lines.  Floats use shortest round-trip repr.
    """
    u = q.quadratic.tocoo()
    entries = {(int(i), int(j)): float(v) for i, j, v in zip(u.row, u.col, u.data)}
    lines = [f"c offset {float(q.offset)!r}", f"c layout {q.n} {q.k}", f"c fold_linear {int(fold_linear)}"]
    extra = []
    if fold_linear:
        for i, bi in enumerate(q.linear):
            if bi != 0.0:
                entries[(i, i)] = entries.get((i, i), 0.0) + float(bi)
    else:
        extra = [f"b {i} {float(bi)!r}" for i, bi in enumerate(q.linear) if bi != 0.0]
    body = [f"{i} {j} {v!r}" for (i, j), v in sorted(entries.items())]
    lines.append(f"p qubo {q.dim} {len(body)}")
    Path(path).write_text("\n".join(lines + body + extra) + "\n")


def read_coo(path) -> QuboProblem:
    dim = None
    offset = 0.0
    n, k = 0, 1
    rows, cols, vals = [], [], []
    lin = {}
    declared = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        head = parts[0]
        if head == "c":
            if len(parts) >= 3 and parts[1] == "offset":
                offset = float(parts[2])
            elif len(parts) >= 4 and parts[1] == "layout":
                n, k = int(parts[2]), int(parts[3])
            continue
        if head == "p":
            if len(parts) != 4 or parts[1] != "qubo":
                raise ValueError(f"line {lineno}: bad header {line!r}")
            dim, declared = int(parts[2]), int(parts[3])
            continue
        if dim is None:
            raise ValueError(f"line {lineno}: data before 'p qubo' header")
        if head == "b":
            lin[int(parts[1])] = float(parts[2])
            continue
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j val'")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < dim and 0 <= j < dim):
            raise ValueError(f"line {lineno}: index out of range")
        if i > j:
            i, j = j, i
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if dim is None:
        raise ValueError("missing 'p qubo' header")
    if declared is not None and declared != len(vals):
        raise ValueError(f"header declares {declared} entries, found {len(vals)}")
    linear = np.zeros(dim)
    for i, v in lin.items():
        linear[i] = v
    u = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=np.float64)
    if n * k != dim:
        n, k = dim, 1
    return QuboProblem(u, linear, offset, n, k)


def to_json_dict(q: QuboProblem, weights: PenaltyWeights | None = None) -> dict:
    u = q.quadratic.tocoo()
    out = {
        "dim": q.dim,
        "layout": {"n": q.n, "k": q.k, "index": "i*k+c"},
        "quadratic": [[int(i), int(j), float(v)] for i, j, v in zip(u.row, u.col, u.data)],
        "linear": [float(v) for v in q.linear],
        "offset": float(q.offset),
    }
    if weights is not None:
        out["weights"] = asdict(weights)
    return out


def from_json_dict(d: dict) -> QuboProblem:
    dim = int(d["dim"])
    trip = np.asarray(d["quadratic"], dtype=np.float64).reshape(-1, 3)
    u = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(dim, dim))
    lay = d.get("layout", {})
    return QuboProblem(u, np.asarray(d["linear"], dtype=np.float64), float(d["offset"]),
                       int(lay.get("n", dim)), int(lay.get("k", 1)))


def write_json(q: QuboProblem, path, weights: PenaltyWeights | None = None):
    Path(path).write_text(json.dumps(to_json_dict(q, weights)))


def read_json(path) -> QuboProblem:
    return from_json_dict(json.loads(Path(path).read_text()))
