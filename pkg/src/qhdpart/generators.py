"""Seeded synthetic graphs: planted partitions, G(n, p), rings of cliques."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph


def _pairs_from_codes(codes: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    return codes // width, codes % width


def _sample_block(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    if total == 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    count = rng.binomial(total, p)
    return np.sort(rng.choice(total, size=count, replace=False))


def planted_partition(sizes: Sequence[int], p_in: float, p_out: float,
                      seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Stochastic block model with uniform in/out probabilities.

    Returns the graph and the planted group of every node.  Nodes are
    numbered block by block.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("block sizes must be >= 1")
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    n = int(starts[-1])
    rows, cols = [], []
    for a, sa in enumerate(sizes):
        # sample the full sa x sa square, keep the strict upper triangle;
        # each unordered pair still appears once with probability p_in
        codes = _sample_block(rng, sa * sa, p_in)
        r, c = _pairs_from_codes(codes, sa)
        keep = r < c
        rows.append(r[keep] + starts[a])
        cols.append(c[keep] + starts[a])
        for b in range(a + 1, len(sizes)):
            sb = sizes[b]
            codes = _sample_block(rng, sa * sb, p_out)
            r, c = _pairs_from_codes(codes, sb)
            rows.append(r + starts[a])
            cols.append(c + starts[b])
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    upper = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    truth = np.repeat(np.arange(len(sizes)), sizes)
    return Graph((upper + upper.T).tocsr()), truth


def erdos_renyi(n: int, p: float, seed: int = 0) -> Graph:
    g, _ = planted_partition([n], p, 0.0, seed)
    return g


def ring_of_cliques(cliques: int, size: int) -> Graph:
    """``cliques`` copies of K_size joined in a ring by single edges."""
    if cliques < 1 or size < 2:
        raise ValueError("need at least one clique of size >= 2")
    edges = []
    for c in range(cliques):
        base = c * size
        edges += [(base + i, base + j) for i in range(size) for j in range(i + 1, size)]
        if cliques > 1:
            edges.append((base, ((c + 1) % cliques) * size + 1))
    return Graph.from_edges(cliques * size, sorted(set(edges)))


def disjoint_cliques(cliques: int, size: int) -> Graph:
    edges = [(c * size + i, c * size + j)
             for c in range(cliques) for i in range(size) for j in range(i + 1, size)]
    return Graph.from_edges(cliques * size, edges)
