"""Weighted undirected graphs, edge-list ingestion and modularity.

Adjacency is kept as a symmetric CSR matrix ``A``.  A self-loop of edge
weight ``w`` is stored once, on the diagonal, as ``A[i, i] = 2 * w`` so that
degrees are plain row sums and ``2m = sum(d)``.  This is the convention that
makes super-node self-loops produced by coarsening preserve modularity.
"""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DENSE_THRESHOLD = 2000


class GraphFormatError(ValueError):
    """Raised when an edge list cannot be parsed."""


def _row_sums(indptr: np.ndarray, data: np.ndarray) -> np.ndarray:
    # np.add.reduceat misbehaves on empty segments, so mask those out.
    n = len(indptr) - 1
    out = np.zeros(n, dtype=np.float64)
    if data.size == 0:
        return out
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    out[nonempty] = np.add.reduceat(data, starts[nonempty])
    return out


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted undirected graph.

    Build one with :meth:`from_edges` or :func:`load_edge_list` rather than
    calling the constructor directly.
    """

    adjacency: sp.csr_matrix
    labels: tuple = ()
    degrees: np.ndarray = field(init=False, repr=False)
    two_m: float = field(init=False)

    def __post_init__(self):
        a = self.adjacency
        if not sp.isspmatrix_csr(a):
            a = sp.csr_matrix(a)
        a = a.astype(np.float64)
        a.sum_duplicates()
        a.sort_indices()
        a.eliminate_zeros()
        if a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if a.nnz and a.data.min() < 0:
            raise ValueError("edge weights must be nonnegative")
        if (a != a.T).nnz:
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", a)
        deg = _row_sums(a.indptr, a.data)
        object.__setattr__(self, "degrees", deg)
        # fsum keeps 2m bit-identical to a one-group degree total
        object.__setattr__(self, "two_m", math.fsum(deg))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(a.shape[0])))
        elif len(self.labels) != a.shape[0]:
            raise ValueError("labels length does not match node count")

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence],
        labels: Sequence[Hashable] = (),
    ) -> "Graph":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples over nodes ``0..n-1``.

        Parallel edges are summed; ``(u, u, w)`` is a self-loop of weight ``w``.
        """
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if w < 0:
                raise ValueError(f"negative weight on edge ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise IndexError(f"edge ({u}, {v}) out of range for n={n}")
            # a loop lands on the diagonal twice -> 2w
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)
        return cls(a, tuple(labels))

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    n = node_count

    @property
    def total_weight(self) -> float:
        """``m``: total edge weight, self-loops counted once."""
        return self.two_m / 2.0

    m = total_weight

    @property
    def edge_count(self) -> int:
        """Number of distinct non-loop node pairs joined by an edge."""
        a = self.adjacency
        off = a.nnz - int(np.count_nonzero(a.diagonal()))
        return off // 2

    def self_loop_weights(self) -> np.ndarray:
        return self.adjacency.diagonal() / 2.0

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        nb = a.indices[a.indptr[i]:a.indptr[i + 1]]
        return nb[nb != i]

    def density(self) -> float:
        n = self.node_count
        if n < 2:
            return 0.0
        return 2.0 * self.edge_count / (n * (n - 1))

    def modularity_matrix(self, dense_threshold: int = DENSE_THRESHOLD) -> "ModularityMatrixView":
        return ModularityMatrixView(self, dense_threshold)

    def __repr__(self):
        return f"Graph(n={self.node_count}, edges={self.edge_count}, m={self.total_weight:g})"


@dataclass
class Partition:
    """Node -> group assignment with groups ``0..k-1``; groups may be empty."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.k):
            raise ValueError(f"group ids must lie in [0, {self.k})")

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def copy(self) -> "Partition":
        return Partition(self.assignment.copy(), self.k)

    def relabeled(self) -> "Partition":
        """Canonical labels: groups renumbered by first appearance."""
        mapping = {}
        out = np.empty_like(self.assignment)
        for i, c in enumerate(self.assignment):
            out[i] = mapping.setdefault(int(c), len(mapping))
        return Partition(out, self.k)

    def __len__(self):
        return self.assignment.size


class ModularityMatrixView:
    """Implicit ``B = A - d d^T / 2m`` backed by the sparse adjacency."""

    def __init__(self, g: Graph, dense_threshold: int = DENSE_THRESHOLD):
        if g.two_m <= 0:
            raise ValueError("modularity matrix undefined for a graph with m = 0")
        self.graph = g
        self.dense_threshold = dense_threshold

    @property
    def shape(self):
        n = self.graph.node_count
        return (n, n)

    def entry(self, i: int, j: int) -> float:
        g = self.graph
        return g.adjacency[i, j] - g.degrees[i] * g.degrees[j] / g.two_m

    def matvec(self, x: np.ndarray) -> np.ndarray:
        g = self.graph
        x = np.asarray(x, dtype=np.float64)
        return g.adjacency @ x - np.multiply.outer(g.degrees, g.degrees @ x) / g.two_m

    def dense(self) -> np.ndarray:
        g = self.graph
        if g.node_count > self.dense_threshold:
            raise MemoryError(
                f"refusing to materialize a {g.node_count}x{g.node_count} modularity "
                f"matrix (threshold {self.dense_threshold})"
            )
        return g.adjacency.toarray() - np.outer(g.degrees, g.degrees) / g.two_m


def _check_partition(g: Graph, p: Partition):
    if len(p) != g.node_count:
        raise ValueError(f"partition covers {len(p)} nodes, graph has {g.node_count}")
    if g.two_m <= 0:
        raise ValueError("modularity undefined for a graph with m = 0")


def _internal_weights(g: Graph, assignment: np.ndarray) -> np.ndarray:
    """Per-node weight towards nodes of its own group (self-loop included)."""
    a = g.adjacency
    rows = np.repeat(np.arange(g.node_count), np.diff(a.indptr))
    same = assignment[rows] == assignment[a.indices]
    return _row_sums(a.indptr, a.data * same)


def group_degree_sums(g: Graph, p: Partition) -> np.ndarray:
    return np.bincount(p.assignment, weights=g.degrees, minlength=p.k)


def modularity(g: Graph, p: Partition) -> float:
    """Newman modularity over ordered pairs, diagonal included."""
    _check_partition(g, p)
    w_in = _internal_weights(g, p.assignment)
    order = np.argsort(p.assignment, kind="stable")
    bounds = np.searchsorted(p.assignment[order], np.arange(p.k + 1))
    intra = 0.0
    null = 0.0
    for c in range(p.k):
        members = order[bounds[c]:bounds[c + 1]]
        if members.size == 0:
            continue
        dc = math.fsum(g.degrees[members])
        intra += math.fsum(w_in[members])
        null += dc * (dc / g.two_m)
    return (intra - null) / g.two_m


def modularity_gain(
    g: Graph,
    p: Partition,
    node: int,
    target_group: int,
    group_degrees: np.ndarray | None = None,
) -> float:
    """Change in modularity from moving ``node`` into ``target_group``.

    Costs O(deg(node)) when ``group_degrees`` (per-group degree sums, as from
    :func:`group_degree_sums`) is supplied and O(n) otherwise.
    """
    if not 0 <= target_group < p.k:
        raise IndexError(f"group {target_group} out of range [0, {p.k})")
    if not 0 <= node < g.node_count:
        raise IndexError(f"node {node} out of range")
    src = int(p.assignment[node])
    if src == target_group:
        return 0.0
    if group_degrees is None:
        group_degrees = group_degree_sums(g, p)
    a = g.adjacency
    lo, hi = a.indptr[node], a.indptr[node + 1]
    nbrs, w = a.indices[lo:hi], a.data[lo:hi]
    keep = nbrs != node
    nbr_groups = p.assignment[nbrs[keep]]
    w = w[keep]
    k_src = w[nbr_groups == src].sum()
    k_dst = w[nbr_groups == target_group].sum()
    d = g.degrees[node]
    return (k_dst - k_src + d * (group_degrees[src] - d - group_degrees[target_group]) / g.two_m) * 2.0 / g.two_m


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        path = Path(source)
        raw = path.read_bytes()
        if path.suffix == ".gz" or raw[:2] == b"\x1f\x8b":
            raw = gzip.decompress(raw)
        return io.StringIO(raw.decode("utf-8"))
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data)


def load_edge_list(
    source,
    directed_hint: bool = False,
    delimiter: str | None = None,
    skip_header: bool | None = None,
) -> Graph:
    """Parse ``u v [w]`` lines into a symmetrized :class:`Graph`.

    ``source`` may be a path (``.gz`` is decompressed), bytes, or a file-like
    object.  Lines starting with ``#`` or ``%`` are comments.  Integer ids are
    kept as integers and everything else is treated as a string label; labels
    are interned to ``0..n-1`` in order of first appearance and kept on
    ``Graph.labels``.  ``directed_hint`` is informational only: arcs ``u->v``
    and ``v->u`` both become one undirected edge with their weights summed.

    ``delimiter=None`` splits on whitespace, and also on commas for paths
    ending in ``.csv``.  ``skip_header=None`` drops a first data line whose
    fields are not numbers only for ``.csv`` input.
    """
    del directed_hint
    is_csv = isinstance(source, (str, Path)) and str(source).removesuffix(".gz").endswith(".csv")
    if delimiter is None and is_csv:
        delimiter = ","
    if skip_header is None:
        skip_header = is_csv
    ids: dict = {}
    labels: list = []
    rows, cols, vals = [], [], []
    seen_data = False
    with _open_text(source) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            parts = [t.strip() for t in s.split(delimiter)] if delimiter else s.split()
            if skip_header and not seen_data:
                seen_data = True
                if not all(_is_number(t) for t in parts):
                    continue
            seen_data = True
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"line {lineno}: expected 'u v [w]', got {s!r}")
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
                if not math.isfinite(w):
                    raise GraphFormatError(f"line {lineno}: non-finite weight")
                if w < 0:
                    raise GraphFormatError(f"line {lineno}: negative weight {w}")
            else:
                w = 1.0
            uv = []
            for tok in parts[:2]:
                key = int(tok) if _is_int(tok) else tok
                if isinstance(key, int) and key < 0:
                    raise GraphFormatError(f"line {lineno}: negative node id {tok}")
                if key not in ids:
                    ids[key] = len(labels)
                    labels.append(key)
                uv.append(ids[key])
            rows += uv
            cols += uv[::-1]
            vals += [w, w]
    if not labels:
        raise GraphFormatError("edge list is empty")
    n = len(labels)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)
    return Graph(a, tuple(labels))


def _is_int(tok: str) -> bool:
    return tok.lstrip("+-").isdigit()


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def write_edge_list(g: Graph, path, with_weights: bool = True):
    """Write each undirected edge once, using the original labels."""
    a = sp.triu(g.adjacency, format="coo")
    lines = []
    for u, v, w in zip(a.row, a.col, a.data):
        w = float(w) / 2.0 if u == v else float(w)
        lab_u, lab_v = g.labels[u], g.labels[v]
        lines.append(f"{lab_u} {lab_v} {w!r}" if with_weights else f"{lab_u} {lab_v}")
    Path(path).write_text("\n".join(lines) + "\n")
