"""Reference solvers: exhaustive enumeration and simulated annealing."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, Partition, modularity
from .qhd import bitstrings
from .qubo import QuboProblem, energies, energy

BRUTE_QUBO_MAX_DIM = 24
BRUTE_MODULARITY_CAP = 10**7


@dataclass
class SolveResult:
    solution: np.ndarray | Partition
    objective: float
    proven_optimal: bool
    wall_time: float
    evaluations: int
    info: dict = field(default_factory=dict)


def brute_force_qubo(q: QuboProblem, chunk_bits: int = 16) -> SolveResult:
    """Exhaustive minimum; ties resolve to the lexicographically smallest vector."""
    dim = q.dim
    if dim > BRUTE_QUBO_MAX_DIM:
        raise ValueError(f"brute force limited to dim <= {BRUTE_QUBO_MAX_DIM}, got {dim}")
    t0 = time.perf_counter()
    lo_bits = min(dim, chunk_bits)
    hi_bits = dim - lo_bits
    low = bitstrings(lo_bits)
    best_e, best_s = np.inf, -1
    for hi in range(1 << hi_bits):
        prefix = ((hi >> np.arange(hi_bits - 1, -1, -1)) & 1).astype(np.int8)
        xs = np.hstack([np.broadcast_to(prefix, (low.shape[0], hi_bits)), low])
        e = energies(q, xs)
        j = int(np.argmin(e))
        if e[j] < best_e:
            best_e, best_s = float(e[j]), (hi << lo_bits) | j
    x = ((best_s >> np.arange(dim - 1, -1, -1)) & 1).astype(np.int8)
    return SolveResult(x, energy(q, x), True, time.perf_counter() - t0, 1 << dim)


def brute_force_modularity(g: Graph, k: int, cap: int = BRUTE_MODULARITY_CAP,
                           chunk: int = 1 << 15) -> SolveResult:
    """Best partition into at most ``k`` groups (node 0 pinned to group 0).

    Groups may be empty.  Among equally good labelings the first in
    lexicographic order of ``(c_1, ..., c_{n-1})`` wins.
    """
    n = g.node_count
    if k < 1:
        raise ValueError("k must be >= 1")
    if g.two_m <= 0:
        raise ValueError("modularity undefined for m = 0")
    total = k ** (n - 1)
    if total > cap:
        raise ValueError(
            f"search space k^(n-1) = {k}^{n - 1} exceeds the brute-force cap of {cap:.0e}"
        )
    t0 = time.perf_counter()
    a = g.adjacency.toarray()
    deg = g.degrees
    two_m = g.two_m
    pows = k ** np.arange(n - 2, -1, -1, dtype=np.int64) if n > 1 else np.zeros(0, np.int64)
    best_q, best_code = -np.inf, 0
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        labels = np.zeros((codes.size, n), dtype=np.int64)
        if n > 1:
            labels[:, 1:] = (codes[:, None] // pows) % k
        q = np.zeros(codes.size)
        for c in range(k):
            mask = (labels == c).astype(np.float64)
            intra = np.einsum("ij,ij->i", mask @ a, mask)
            dc = mask @ deg
            q += intra - dc * dc / two_m
        q /= two_m
        j = int(np.argmax(q))
        if q[j] > best_q + 1e-12:
            best_q, best_code = float(q[j]), int(codes[j])
    assign = np.zeros(n, dtype=np.int64)
    if n > 1:
        assign[1:] = (best_code // pows) % k
    p = Partition(assign, k)
    return SolveResult(p, modularity(g, p), True, time.perf_counter() - t0, total)


@dataclass(frozen=True)
class AnnealParams:
    """``sweeps`` is the total budget, spent as consecutive restarts of
    ``restart_sweeps`` sweeps each (the last one possibly truncated)."""

    sweeps: int = 200
    restart_sweeps: int = 100
    t_start: float | None = None  # None: the largest single-flip cost
    t_end: float | None = None  # None: 1e-3 of the smallest nonzero field scale
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.restart_sweeps < 1:
            raise ValueError("sweeps and restart_sweeps must be >= 1")


def _temperatures(q: QuboProblem, params: AnnealParams) -> tuple[float, float]:
    s = q.coupling
    lf = q.local_fields()
    row = np.asarray(abs(s).sum(axis=1)).ravel()
    scale = float(np.abs(lf).max(initial=0.0) + row.max(initial=0.0)) or 1.0
    t_hi = params.t_start if params.t_start is not None else scale
    if params.t_end is not None:
        t_lo = params.t_end
    else:
        nz = np.abs(np.concatenate([lf, s.data]))
        nz = nz[nz > 0]
        t_lo = 1e-3 * (float(nz.min()) if nz.size else scale)
    return t_hi, min(t_lo, t_hi)


def simulated_annealing_qubo(q: QuboProblem, params: AnnealParams = AnnealParams(),
                             x0: np.ndarray | None = None) -> SolveResult:
    """Metropolis single-bit flips under a geometric temperature ladder.

    Every sweep visits each variable once in shuffled order.  Restart ``r``
    draws from its own stream seeded by ``(seed, r)`` and starts from a
    random vector (``x0`` for the first restart if given), so a larger
    budget replays the smaller one exactly before going further: the
    best-seen energy can only improve as ``sweeps`` grows.
    """
    t0 = time.perf_counter()
    dim = q.dim
    s = q.coupling
    indptr, indices, data = s.indptr, s.indices, s.data
    t_hi, t_lo = _temperatures(q, params)
    ratio = (t_lo / t_hi) ** (1.0 / max(params.restart_sweeps - 1, 1))
    best_x, best_e = None, np.inf
    evals = 0
    remaining = params.sweeps
    restart = 0
    while remaining > 0:
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, restart]))
        x = rng.integers(0, 2, size=dim).astype(np.int8)
        if restart == 0 and x0 is not None:
            x = np.asarray(x0, dtype=np.int8).copy()
        fields = q.local_fields() + s @ x.astype(np.float64)
        e = energy(q, x)
        if e < best_e:
            best_x, best_e = x.copy(), e
        temp = t_hi
        for _ in range(min(remaining, params.restart_sweeps)):
            order = rng.permutation(dim)
            u = rng.random(dim)
            for i, r in zip(order.tolist(), u.tolist()):
                d = -fields[i] if x[i] else fields[i]
                if d <= 0 or r < math.exp(-d / temp):
                    sign = -1.0 if x[i] else 1.0
                    x[i] ^= 1
                    e += d
                    lo, hi = indptr[i], indptr[i + 1]
                    fields[indices[lo:hi]] += sign * data[lo:hi]
                    if e < best_e - 1e-12:
                        best_e = e
                        best_x = x.copy()
            evals += dim
            temp *= ratio
            remaining -= 1
        restart += 1
    return SolveResult(best_x, energy(q, best_x), False, time.perf_counter() - t0, evals,
                       {"t_start": t_hi, "t_end": t_lo, "sweeps": params.sweeps, "restarts": restart})
