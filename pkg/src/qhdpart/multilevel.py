"""Multilevel coarsen / solve / project / refine partitioning."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph, Partition, modularity
from .qhd import SolverParams, solve_qubo
from .qubo import PenaltyWeights, build_qubo, decode_assignment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchWeightParams:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha, beta must be >= 0 with a positive sum")


@dataclass
class CoarseningLevel:
    graph: Graph
    mapping: np.ndarray  # fine node -> super-node


@dataclass(frozen=True)
class PipelineConfig:
    k: int
    theta: int = 512
    match: MatchWeightParams = field(default_factory=MatchWeightParams)
    sweep_cap: int = 20
    solver: SolverParams = field(default_factory=SolverParams)
    weights: PenaltyWeights | None = None
    seed: int = 0
    max_levels: int = 64

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.theta < self.k:
            raise ValueError("theta must be >= k")
        if self.sweep_cap < 1:
            raise ValueError("sweep_cap must be >= 1")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "theta": self.theta,
            "match": asdict(self.match),
            "sweep_cap": self.sweep_cap,
            "solver": self.solver.to_dict(),
            "weights": None if self.weights is None else asdict(self.weights),
            "seed": self.seed,
            "max_levels": self.max_levels,
        }


def _offdiag_binary(g: Graph) -> sp.csr_matrix:
    a = g.adjacency.copy()
    a.setdiag(0)
    a.eliminate_zeros()
    a.data[:] = 1.0
    return a


def _max_edge_weight(g: Graph) -> float:
    a = g.adjacency
    rows = np.repeat(np.arange(g.node_count), np.diff(a.indptr))
    off = a.data[rows != a.indices]
    return float(off.max()) if off.size else 0.0


def match_weight(g: Graph, u: int, v: int, params: MatchWeightParams = MatchWeightParams()) -> float:
    """Heavy-edge score: Jaccard overlap of the endpoints' other neighbours
    blended with the edge weight relative to the heaviest non-loop edge."""
    if u == v or g.adjacency[u, v] == 0:
        raise ValueError(f"({u}, {v}) is not an edge")
    nu = set(g.neighbors(u).tolist()) - {v}
    nv = set(g.neighbors(v).tolist()) - {u}
    union = nu | nv
    jac = len(nu & nv) / len(union) if union else 0.0
    return params.alpha * jac + params.beta * g.adjacency[u, v] / _max_edge_weight(g)


def edge_match_weights(g: Graph, params: MatchWeightParams = MatchWeightParams(),
                       block: int = 512) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scores of every non-loop edge ``u < v`` as ``(u, v, w)`` arrays."""
    upper = sp.triu(g.adjacency, k=1, format="csr")
    upper.sort_indices()
    eu = np.repeat(np.arange(g.node_count), np.diff(upper.indptr))
    ev = upper.indices.copy()
    ew = upper.data.copy()
    if ew.size == 0:
        return eu, ev, ew
    p = _offdiag_binary(g)
    deg = np.diff(p.indptr)
    common = np.empty(ew.size)
    # block rows keep P @ P from being materialized in full
    for lo in range(0, g.node_count, block):
        hi = min(lo + block, g.node_count)
        sel = slice(upper.indptr[lo], upper.indptr[hi])
        if upper.indptr[hi] == upper.indptr[lo]:
            continue
        prod = (p[lo:hi] @ p).tocsr()
        common[sel] = np.asarray(prod[eu[sel] - lo, ev[sel]]).ravel()
    union = (deg[eu] - 1) + (deg[ev] - 1) - common
    jac = np.divide(common, union, out=np.zeros_like(common), where=union > 0)
    return eu, ev, params.alpha * jac + params.beta * ew / ew.max()


def coarsen(g: Graph, params: MatchWeightParams = MatchWeightParams(), seed: int = 0) -> CoarseningLevel:
    """Greedy maximal matching by descending score (ties: lower endpoints
    first), then contraction ``A' = M^T A M``.

    A matched pair's connecting weight becomes a self-loop on the super-node.
    ``seed`` is unused since the tie-break is fully deterministic.
    """
    del seed
    n = g.node_count
    eu, ev, ew = edge_match_weights(g, params)
    order = np.lexsort((ev, eu, -ew))
    mate = np.full(n, -1, dtype=np.int64)
    for e in order:
        u, v = eu[e], ev[e]
        if mate[u] < 0 and mate[v] < 0:
            mate[u], mate[v] = v, u
    mapping = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for i in range(n):
        if mapping[i] < 0:
            mapping[i] = nxt
            if mate[i] >= 0:
                mapping[mate[i]] = nxt
            nxt += 1
    member = sp.csr_matrix((np.ones(n), (np.arange(n), mapping)), shape=(n, nxt))
    coarse = (member.T @ g.adjacency @ member).tocsr()
    # summation order can differ between (a, b) and (b, a); average to make
    # the result bit-symmetric
    coarse = ((coarse + coarse.T) * 0.5).tocsr()
    return CoarseningLevel(Graph(coarse), mapping)


def project(coarse_partition: Partition, level: CoarseningLevel) -> Partition:
    if len(coarse_partition) != level.graph.node_count:
        raise ValueError(
            f"coarse partition has {len(coarse_partition)} nodes, level has {level.graph.node_count}"
        )
    return Partition(coarse_partition.assignment[level.mapping], coarse_partition.k)


def refine(g: Graph, p: Partition, sweep_cap: int = 20, stats: dict | None = None) -> Partition:
    """Greedy node moves in id order to the best neighbouring group.

    A node only moves for a strictly positive gain; ties between groups go
    to the lowest id.  Stops after a sweep with no moves or ``sweep_cap``
    sweeps.
    """
    if len(p) != g.node_count:
        raise ValueError("partition does not match graph")
    k = p.k
    assign = p.assignment.copy()
    a = g.adjacency
    indptr, indices, data = a.indptr, a.indices, a.data
    deg = g.degrees
    two_m = g.two_m
    gdeg = np.bincount(assign, weights=deg, minlength=k)
    tol = 1e-13 * two_m
    sweeps = moves = 0
    for _ in range(sweep_cap):
        sweeps += 1
        moved = 0
        for i in range(g.node_count):
            lo, hi = indptr[i], indptr[i + 1]
            nb = indices[lo:hi]
            keep = nb != i
            nb = nb[keep]
            if nb.size == 0:
                continue
            w = data[lo:hi][keep]
            src = assign[i]
            kin = np.bincount(assign[nb], weights=w, minlength=k)
            present = np.bincount(assign[nb], minlength=k) > 0
            d = deg[i]
            # 2m * gain of moving i from src to c; src itself scores 0
            score = 2.0 * (kin - kin[src]) + 2.0 * d * (gdeg[src] - d - gdeg) / two_m
            score[src] = 0.0
            score = np.where(present, score, -np.inf)
            score[src] = 0.0
            c = int(np.argmax(score))
            if c != src and score[c] > tol:
                assign[i] = c
                gdeg[src] -= d
                gdeg[c] += d
                moved += 1
        moves += moved
        if moved == 0:
            break
    if stats is not None:
        stats["sweeps"] = sweeps
        stats["moves"] = moves
    return Partition(assign, k)


def random_partition(n: int, k: int, seed: int) -> Partition:
    rng = np.random.default_rng(seed)
    return Partition(rng.integers(0, k, size=n), k)


@dataclass
class PipelineReport:
    levels: list = field(default_factory=list)  # node count per level, finest first
    edges: list = field(default_factory=list)
    modularity_trace: list = field(default_factory=list)
    base: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    fallback: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def solve_base(g: Graph, cfg: PipelineConfig, report: PipelineReport) -> Partition:
    """QUBO + QHD on ``g``; every kept candidate is decoded with repair and
    refined, and the highest-modularity result wins (ties: lower energy)."""
    t0 = time.perf_counter()
    try:
        q = build_qubo(g, cfg.k, cfg.weights)
        res = solve_qubo(q, cfg.solver)
        stats = {k: v for k, v in res.stats.items() if k != "best_energy_trace"}
        hot = res.x.reshape(g.node_count, cfg.k).sum(axis=1)
        candidates = res.candidates or [(res.energy, res.x)]
        decoded = [decode_assignment(q, x, repair=True, graph=g) for _, x in candidates]
        report.base = {
            "n": g.node_count,
            "dim": q.dim,
            "energy": res.energy,
            "one_hot_violations": int(np.count_nonzero(hot != 1)),
            "decoded_modularity": modularity(g, decoded[0]),
            "candidates": len(decoded),
            "solver": stats,
        }
    except (ValueError, MemoryError) as exc:
        log.warning("base solve failed (%s); using a random partition", exc)
        report.fallback = f"{type(exc).__name__}: {exc}"
        decoded = [random_partition(g.node_count, cfg.k, cfg.seed)]
    t1 = time.perf_counter()
    best, best_q, chosen = None, -np.inf, 0
    for j, cand in enumerate(decoded):
        p = refine(g, cand, cfg.sweep_cap)
        qv = modularity(g, p)
        if qv > best_q:
            best, best_q, chosen = p, qv, j
    if report.fallback is None:
        report.base["chosen_candidate"] = chosen
    report.timings["base_solve"] = t1 - t0
    report.timings["base_refine"] = time.perf_counter() - t1
    return best


def coarsen_hierarchy(g: Graph, cfg: PipelineConfig) -> list[CoarseningLevel]:
    levels = []
    cur = g
    while cur.node_count > cfg.theta and len(levels) < cfg.max_levels:
        lvl = coarsen(cur, cfg.match, cfg.seed)
        if lvl.graph.node_count >= cur.node_count:
            break
        levels.append(lvl)
        cur = lvl.graph
    return levels


def partition_graph(g: Graph, cfg: PipelineConfig) -> tuple[Partition, PipelineReport]:
    report = PipelineReport()
    t0 = time.perf_counter()
    levels = coarsen_hierarchy(g, cfg)
    report.timings["coarsen"] = time.perf_counter() - t0
    report.levels = [g.node_count] + [lv.graph.node_count for lv in levels]
    report.edges = [g.edge_count] + [lv.graph.edge_count for lv in levels]
    base_graph = levels[-1].graph if levels else g
    p = solve_base(base_graph, cfg, report)
    report.modularity_trace.append(modularity(base_graph, p))
    t1 = time.perf_counter()
    for i in range(len(levels) - 1, -1, -1):
        fine = levels[i - 1].graph if i > 0 else g
        p = refine(fine, project(p, levels[i]), cfg.sweep_cap)
        report.modularity_trace.append(modularity(fine, p))
    report.timings["uncoarsen"] = time.perf_counter() - t1
    report.timings["total"] = time.perf_counter() - t0
    return p, report
