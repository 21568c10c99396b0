from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from qhdpart.graph import Graph, Partition, load_edge_list
from qhdpart.qubo import QuboProblem

KARATE = Path(__file__).resolve().parents[1] / "src" / "qhdpart" / "data" / "karate.edgelist"


@pytest.fixture(scope="session")
def karate() -> Graph:
    return load_edge_list(KARATE)


def random_graph(n: int, p: float, seed: int, weighted: bool = False, loops: bool = False) -> Graph:
    """Seeded G(n, p), optionally weighted or with self-loops; never edgeless."""
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j, float(rng.uniform(0.5, 3.0)) if weighted else 1.0))
        if loops and rng.random() < 0.2:
            edges.append((i, i, float(rng.uniform(0.5, 2.0))))
    if not any(u != v for u, v, _ in edges):
        edges.append((0, n - 1, 1.0))
    return Graph.from_edges(n, edges)


def to_networkx(g: Graph) -> nx.Graph:
    """Independent copy for oracle checks; self-loops carry weight A_ii / 2."""
    out = nx.Graph()
    out.add_nodes_from(range(g.node_count))
    a = g.adjacency.tocoo()
    for u, v, w in zip(a.row, a.col, a.data):
        if u < v:
            out.add_edge(int(u), int(v), weight=float(w))
        elif u == v:
            out.add_edge(int(u), int(u), weight=float(w) / 2.0)
    return out


def random_qubo(dim: int, seed: int, density: float = 1.0) -> QuboProblem:
    rng = np.random.default_rng(seed)
    u = np.triu(rng.normal(size=(dim, dim)))
    u *= rng.random((dim, dim)) < density
    return QuboProblem.from_dense(u, rng.normal(size=dim), float(rng.normal()))


def naive_energy(u: np.ndarray, b: np.ndarray, offset: float, x) -> float:
    e = offset
    for i in range(len(x)):
        e += b[i] * x[i]
        for j in range(len(x)):
            e += u[i, j] * x[i] * x[j]
    return e


@st.composite
def graphs(draw, max_n: int = 12, weighted: bool = True, loops: bool = True):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i, n) if loops or i != j]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=3 * n, unique=True))
    if all(i == j for i, j in chosen):
        chosen.append((0, 1))
    ws = st.floats(0.25, 4.0) if weighted else st.just(1.0)
    edges = [(i, j, draw(ws)) for i, j in chosen]
    return Graph.from_edges(n, edges)


@st.composite
def graph_and_partition(draw, max_n: int = 12, max_k: int = 4):
    g = draw(graphs(max_n))
    k = draw(st.integers(1, max_k))
    assign = draw(st.lists(st.integers(0, k - 1), min_size=g.node_count, max_size=g.node_count))
    return g, Partition(np.array(assign), k)
