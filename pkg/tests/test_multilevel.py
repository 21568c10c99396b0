import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graphs, random_graph
from qhdpart.generators import disjoint_cliques, planted_partition
from qhdpart.graph import Graph, Partition, modularity
from qhdpart.multilevel import (CoarseningLevel, MatchWeightParams, PipelineConfig, coarsen,
                                coarsen_hierarchy, edge_match_weights, match_weight, partition_graph,
                                project, random_partition, refine)
from qhdpart.qhd import QhdSchedule, SolverParams

TRIANGLE_PENDANT = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
K4 = Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])


# -- matching weights ---------------------------------------------------------------

def test_identical_neighbourhoods_score_one():
    assert match_weight(K4, 0, 1) == pytest.approx(1.0)


def test_disjoint_neighbourhoods_score_half():
    path = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert match_weight(path, 1, 2) == pytest.approx(0.5)


def test_triangle_with_pendant_by_hand():
    # N(u)\{v} vs N(v)\{u}: {2}/{2} -> 1, {1}/{1,3} -> 1/2, {0,1}/{} -> 0
    assert match_weight(TRIANGLE_PENDANT, 0, 1) == pytest.approx(1.0)
    assert match_weight(TRIANGLE_PENDANT, 0, 2) == pytest.approx(0.75)
    assert match_weight(TRIANGLE_PENDANT, 2, 3) == pytest.approx(0.5)
    tuned = MatchWeightParams(alpha=0.2, beta=0.8)
    assert match_weight(TRIANGLE_PENDANT, 0, 2, tuned) == pytest.approx(0.2 * 0.5 + 0.8)


def test_weight_term_is_relative_to_heaviest_edge():
    g = Graph.from_edges(3, [(0, 1, 4.0), (1, 2, 1.0)])
    assert match_weight(g, 1, 2) == pytest.approx(0.5 * 0.0 + 0.5 * 0.25)


def test_match_weight_rejects_non_edges():
    with pytest.raises(ValueError):
        match_weight(TRIANGLE_PENDANT, 0, 3)
    with pytest.raises(ValueError):
        MatchWeightParams(alpha=-0.1)


@settings(max_examples=40, deadline=None)
@given(graphs(max_n=10))
def test_vectorized_weights_match_pairwise(g):
    eu, ev, ew = edge_match_weights(g, block=3)
    for u, v, w in zip(eu, ev, ew):
        assert w == pytest.approx(match_weight(g, int(u), int(v)), abs=1e-12)


# -- coarsening ------------------------------------------------------------------------

def test_c4_merges_into_two_super_nodes():
    lvl = coarsen(C4)
    assert lvl.graph.node_count == 2
    assert lvl.graph.two_m == C4.two_m
    assert sorted(np.bincount(lvl.mapping).tolist()) == [2, 2]


def test_single_edge_becomes_a_self_loop():
    lvl = coarsen(Graph.from_edges(2, [(0, 1)]))
    assert lvl.graph.node_count == 1
    assert lvl.graph.self_loop_weights()[0] == 1.0
    assert lvl.graph.total_weight == 1.0


def test_star_allows_one_merge():
    star = Graph.from_edges(6, [(0, i) for i in range(1, 6)])
    assert coarsen(star).graph.node_count == 5


def test_coarsen_is_deterministic():
    g = random_graph(60, 0.1, seed=3, weighted=True)
    a, b = coarsen(g, seed=0), coarsen(g, seed=99)
    assert np.array_equal(a.mapping, b.mapping)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_levels_conserve_weight_and_shrink(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(int(rng.integers(20, 201)), float(rng.uniform(0.02, 0.2)), seed, weighted=True)
    cfg = PipelineConfig(k=3, theta=8)
    cur = g
    for lvl in coarsen_hierarchy(g, cfg):
        assert abs(lvl.graph.two_m - g.two_m) <= 1e-9 * g.two_m
        assert lvl.graph.node_count < cur.node_count
        m = lvl.mapping
        assert m.size == cur.node_count and set(m.tolist()) == set(range(lvl.graph.node_count))
        cur = lvl.graph


def test_hierarchy_stops_without_matchable_edges():
    g = Graph.from_edges(10, [(0, 1)])
    levels = coarsen_hierarchy(g, PipelineConfig(k=2, theta=2))
    assert [lv.graph.node_count for lv in levels] == [9]


# -- projection -------------------------------------------------------------------------

def test_identity_projection():
    p = Partition(np.array([1, 0, 1]), 2)
    lvl = CoarseningLevel(random_graph(3, 1.0, 0), np.arange(3))
    assert project(p, lvl).assignment.tolist() == [1, 0, 1]


def test_c4_projection_separates_pairs():
    lvl = coarsen(C4)
    fine = project(Partition(np.array([0, 1]), 2), lvl)
    pairs = [set(np.flatnonzero(lvl.mapping == s).tolist()) for s in range(2)]
    assert {frozenset(np.flatnonzero(fine.assignment == c).tolist()) for c in range(2)} == \
        {frozenset(p) for p in pairs}


def test_projection_size_mismatch():
    with pytest.raises(ValueError):
        project(Partition(np.array([0, 1, 0]), 2), coarsen(C4))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_projection_preserves_modularity(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(int(rng.integers(10, 201)), float(rng.uniform(0.03, 0.3)), seed, weighted=True)
    lvl = coarsen(g)
    k = int(rng.integers(2, 6))
    cp = Partition(rng.integers(0, k, lvl.graph.node_count), k)
    assert abs(modularity(lvl.graph, cp) - modularity(g, project(cp, lvl))) <= 1e-9


# -- refinement -------------------------------------------------------------------------

def test_local_optimum_is_a_fixed_point():
    g = disjoint_cliques(2, 5)
    p = Partition(np.repeat([0, 1], 5), 2)
    stats = {}
    out = refine(g, p, stats=stats)
    assert out.assignment.tolist() == p.assignment.tolist()
    assert stats == {"sweeps": 1, "moves": 0}


def test_k4_three_one_split_improves():
    best_split = modularity(K4, Partition(np.array([0, 0, 1, 1]), 2))
    out = refine(K4, Partition(np.array([0, 0, 0, 1]), 2))
    assert modularity(K4, out) >= best_split


def test_karate_random_start_strictly_improves(karate):
    p0 = random_partition(34, 4, seed=5)
    out = refine(karate, p0)
    assert modularity(karate, out) > modularity(karate, p0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_refine_never_decreases_modularity(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(int(rng.integers(5, 201)), float(rng.uniform(0.03, 0.3)), seed, weighted=True, loops=True)
    k = int(rng.integers(2, 6))
    p = random_partition(g.node_count, k, seed)
    before = modularity(g, p)
    one = refine(g, p, sweep_cap=1)
    full = refine(g, p)
    assert modularity(g, one) >= before - 1e-12
    assert modularity(g, full) >= modularity(g, one) - 1e-12


def test_refine_rejects_mismatched_partition():
    with pytest.raises(ValueError):
        refine(K4, Partition(np.array([0, 1]), 2))


# -- pipeline ------------------------------------------------------------------------------

def test_small_graph_skips_coarsening():
    g = disjoint_cliques(2, 5)
    p, report = partition_graph(g, PipelineConfig(k=2, theta=64))
    assert report.levels == [10]
    assert modularity(g, p) == 0.5
    assert report.base["one_hot_violations"] >= 0 and report.fallback is None


def test_karate_direct_solve(karate):
    p, report = partition_graph(karate, PipelineConfig(k=4, theta=64))
    assert modularity(karate, p) >= 0.40
    assert report.modularity_trace[-1] == pytest.approx(modularity(karate, p))


def test_multilevel_recovers_planted_groups():
    g, truth = planted_partition([60] * 5, 0.3, 0.01, seed=2)
    p, report = partition_graph(g, PipelineConfig(k=5, theta=64))
    assert len(report.levels) > 1 and report.levels[-1] <= 64
    assert modularity(g, p) >= modularity(g, Partition(truth, 5)) - 0.02
    # projection keeps Q and refinement only raises it
    trace = report.modularity_trace
    assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))


def test_pipeline_falls_back_when_the_base_solve_fails():
    g = random_graph(40, 0.2, seed=1)
    cfg = PipelineConfig(k=4, theta=64, solver=SolverParams(backend="exact"))
    p, report = partition_graph(g, cfg)
    assert report.fallback is not None and "exact backend" in report.fallback
    assert len(p) == 40 and p.assignment.max() < 4


def test_pipeline_is_deterministic():
    g, _ = planted_partition([30] * 4, 0.3, 0.03, seed=8)
    cfg = PipelineConfig(k=4, theta=32, solver=SolverParams(schedule=QhdSchedule(steps=200), seed=3))
    a, ra = partition_graph(g, cfg)
    b, rb = partition_graph(g, cfg)
    assert np.array_equal(a.assignment, b.assignment)
    assert ra.modularity_trace == rb.modularity_trace


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(k=1)
    with pytest.raises(ValueError):
        PipelineConfig(k=8, theta=4)
    with pytest.raises(ValueError):
        PipelineConfig(k=2, sweep_cap=0)
    d = PipelineConfig(k=3).to_dict()
    assert d["theta"] == 512 and d["match"] == {"alpha": 0.5, "beta": 0.5} and d["sweep_cap"] == 20
