import tracemalloc
from functools import reduce

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import random_qubo
from qhdpart.oracles import brute_force_qubo
from qhdpart.qhd import (EXACT_MAX_DIM, QhdSchedule, SolverParams, WaveState, apply_laplacian,
                         auto_potential_scale, bitstrings, evolve_exact, evolve_meanfield,
                         greedy_descent, potential_diagonal, sample_and_round, solve_qubo)
from qhdpart.qubo import QuboProblem, energies, energy

X = np.array([[0.0, 1.0], [1.0, 0.0]])
I2 = np.eye(2)


def axis_op(op, ax, dim):
    # variable 0 is the most significant bit
    return reduce(np.kron, [op if a == ax else I2 for a in range(dim)])


def dense_laplacian(dim):
    return sum(axis_op(X - I2, ax, dim) for ax in range(dim))


def separable_qubo(b, diag=None):
    dim = len(b)
    u = np.diag(diag) if diag is not None else np.zeros((dim, dim))
    return QuboProblem.from_dense(u, np.asarray(b, dtype=float))


# -- schedule -------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["linear", "power"])
def test_presets_are_monotone_and_finite(preset):
    s = QhdSchedule(preset=preset)
    t = s.grid()
    kin, pot = s.kinetic(t), s.potential(t)
    assert np.all(np.diff(kin) <= 1e-15) and np.all(np.diff(pot) >= -1e-15)
    assert np.all(np.isfinite(kin)) and np.all(kin >= 0) and np.all(pot >= 0)


def test_linear_defaults():
    s = QhdSchedule()
    assert (s.t_final, s.steps, s.preset) == (10.0, 1000, "linear")
    assert s.kinetic(0.0) == 1.0 and s.potential(10.0) == 1.0
    assert QhdSchedule(preset="power").potential(0.0) == pytest.approx(0.1 ** 3)


def test_schedule_validation():
    with pytest.raises(ValueError):
        QhdSchedule(t_final=0.0)
    with pytest.raises(ValueError):
        QhdSchedule(steps=0)
    with pytest.raises(ValueError):
        QhdSchedule(preset="cosine")
    with pytest.raises(ValueError):
        QhdSchedule(preset="custom")
    bad = QhdSchedule(preset="custom", kinetic_fn=lambda t: -np.ones_like(t), potential_fn=lambda t: t)
    with pytest.raises(ValueError, match="negative"):
        bad.coefficients()
    nan = QhdSchedule(preset="custom", kinetic_fn=lambda t: t * np.nan, potential_fn=lambda t: t)
    with pytest.raises(ValueError, match="finite"):
        evolve_exact(random_qubo(2, 0), nan)


# -- operators ------------------------------------------------------------------------

def test_bitstrings_order():
    assert bitstrings(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_potential_diagonal_is_energy_of_each_bitstring():
    q = random_qubo(5, seed=3)
    f = potential_diagonal(q)
    for s in (0, 7, 19, 31):
        assert f[s] == pytest.approx(energy(q, bitstrings(5)[s]), abs=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 4])
def test_laplacian_matches_dense_stencil(dim):
    rng = np.random.default_rng(dim)
    psi = rng.normal(size=1 << dim) + 1j * rng.normal(size=1 << dim)
    out = apply_laplacian(psi, dim)
    np.testing.assert_allclose(out, dense_laplacian(dim) @ psi, atol=1e-12)
    assert abs(out.sum()) < 1e-12


def test_exact_evolution_matches_matrix_exponentials():
    # independent oracle: product of dense expm over the same time grid
    q = random_qubo(3, seed=11)
    sched = QhdSchedule(t_final=2.0, steps=400)
    st_ = evolve_exact(q, sched)
    h_kin = -0.5 * dense_laplacian(3)
    f = np.diag(potential_diagonal(q))
    psi = np.full(8, 8 ** -0.5, dtype=complex)
    kin, pot = sched.coefficients()
    for kn, pt in zip(kin, pot):
        psi = expm(-1j * sched.dt * (kn * h_kin + pt * f)) @ psi
    assert np.max(np.abs(st_.amplitudes - psi)) < 1e-4


# -- exact backend ----------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["linear", "power"])
@pytest.mark.parametrize("dim", [1, 4, 8, 12])
def test_norm_is_conserved_throughout(dim, preset):
    q = random_qubo(dim, seed=dim, density=0.5)
    drift = []
    evolve_exact(q, QhdSchedule(preset=preset, steps=200),
                 observe=lambda _, psi: drift.append(abs(np.linalg.norm(psi) - 1.0)))
    assert len(drift) == 200 and max(drift) <= 1e-6


def test_zero_potential_stays_uniform():
    dim = 6
    st_ = evolve_exact(QuboProblem.from_dense(np.zeros((dim, dim))))
    tv = 0.5 * np.abs(st_.probabilities() - 1 / 64).sum()
    assert tv <= 1e-6


def test_frozen_potential_coefficient_keeps_uniform_distribution():
    sched = QhdSchedule(preset="custom", kinetic_fn=lambda t: 1 + t, potential_fn=lambda t: 0 * t)
    st_ = evolve_exact(random_qubo(5, seed=2), sched)
    assert 0.5 * np.abs(st_.probabilities() - 1 / 32).sum() <= 1e-6


def test_single_variable_prefers_lower_energy_state():
    p = evolve_exact(separable_qubo([1.0])).probabilities()
    assert p[0] > p[1]


def test_dim3_argmax_matches_brute_force():
    hits = 0
    for seed in range(20):
        q = random_qubo(3, seed)
        best = brute_force_qubo(q).solution
        s = int("".join(map(str, best)), 2)
        hits += int(np.argmax(evolve_exact(q).probabilities()) == s)
    assert hits >= 16


def test_exact_dim_cap():
    with pytest.raises(ValueError, match="exact backend"):
        evolve_exact(random_qubo(EXACT_MAX_DIM + 1, 0, density=0.1))


# -- mean-field backend ------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_separable_meanfield_equals_independent_single_variable_runs(seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=5)
    diag = rng.normal(size=5)
    sched = QhdSchedule(t_final=5.0, steps=300)
    member = evolve_meanfield(separable_qubo(b, diag), sched, batch=1)[0]
    for i in range(5):
        single = evolve_exact(separable_qubo([b[i]], [diag[i]]), sched)
        np.testing.assert_allclose(member.amplitudes[i], single.amplitudes, atol=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_separable_marginals_match_exact(seed):
    rng = np.random.default_rng(100 + seed)
    dim = int(rng.integers(1, 7))
    q = separable_qubo(rng.normal(size=dim), rng.normal(size=dim))
    sched = QhdSchedule(steps=400)
    mf = evolve_meanfield(q, sched, batch=1)[0].marginals()
    ex = evolve_exact(q, sched).marginals()
    np.testing.assert_allclose(mf, ex, atol=1e-6)


def test_meanfield_norms_conserved_throughout():
    q = random_qubo(30, seed=5, density=0.2)
    worst = []
    evolve_meanfield(q, QhdSchedule(steps=200), batch=3, seed=1,
                     observe=lambda _, psi: worst.append(np.abs(np.linalg.norm(psi, axis=2) - 1).max()))
    assert max(worst) <= 1e-6


def test_all_zero_qubo_keeps_half_occupation():
    # holds for unperturbed starts; phase-noised members rotate under X
    q = QuboProblem.from_dense(np.zeros((7, 7)))
    np.testing.assert_allclose(evolve_meanfield(q, batch=3, seed=4)[0].marginals(), 0.5, atol=1e-6)
    for member in evolve_meanfield(q, batch=3, seed=4, phase_noise=0.0):
        np.testing.assert_allclose(member.marginals(), 0.5, atol=1e-6)


def test_first_member_is_independent_of_batch_size():
    q = random_qubo(8, seed=9, density=0.5)
    a = evolve_meanfield(q, QhdSchedule(steps=100), batch=1, seed=3)[0].amplitudes
    b = evolve_meanfield(q, QhdSchedule(steps=100), batch=4, seed=3)
    np.testing.assert_array_equal(a, b[0].amplitudes)
    assert not np.allclose(b[1].amplitudes, b[0].amplitudes)


def test_meanfield_beats_random_median():
    wins = 0
    for seed in range(20):
        q = random_qubo(6, 300 + seed)
        rng = np.random.default_rng(seed)
        med = np.median(energies(q, rng.integers(0, 2, (1000, 6))))
        wins += solve_qubo(q, SolverParams(backend="meanfield", seed=seed)).energy <= med
    assert wins >= 18


def test_large_sparse_meanfield_memory_is_linear():
    rng = np.random.default_rng(0)
    dim = 2000
    u = sp.random(dim, dim, density=5 / dim, random_state=rng, format="csr")
    q = QuboProblem(u, rng.normal(size=dim))
    _ = q.coupling
    tracemalloc.start()
    states = evolve_meanfield(q, QhdSchedule(steps=20), batch=4, seed=0)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert len(states) == 4 and states[0].amplitudes.shape == (dim, 2)
    # a handful of (batch, dim) complex buffers, nowhere near 2**dim
    assert peak < 40 * 4 * dim * 16


# -- rounding ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_greedy_descent_is_monotone_and_ends_at_local_minimum(dim, seed):
    q = random_qubo(dim, seed, density=0.6)
    x0 = np.random.default_rng(seed).integers(0, 2, dim)
    trace = []
    x, e = greedy_descent(q, x0, trace)
    seq = [energy(q, x0)] + trace
    assert all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))
    assert e == pytest.approx(energy(q, x), abs=1e-12)
    for i in range(dim):
        y = x.copy()
        y[i] ^= 1
        assert energy(q, y) >= e - 1e-12


def test_greedy_descent_ties_go_to_lowest_index():
    q = separable_qubo([-1.0, -1.0, -1.0])
    trace = []
    x, _ = greedy_descent(q, [0, 0, 0], trace)
    assert x.tolist() == [1, 1, 1] and len(trace) == 3
    # equal gains, coupled: flipping bit 0 first blocks bit 1
    q2 = QuboProblem.from_dense(np.array([[0.0, 5.0], [0.0, 0.0]]), np.array([-1.0, -1.0]))
    assert greedy_descent(q2, [0, 0])[0].tolist() == [1, 0]


def test_concentrated_state_returns_its_bitstring_when_locally_optimal():
    q = random_qubo(4, seed=1)
    best = brute_force_qubo(q).solution
    amps = np.zeros(16, dtype=complex)
    amps[int("".join(map(str, best)), 2)] = 1.0
    rr = sample_and_round([WaveState("exact", amps, 4)], q, samples_per_state=5, seed=2)
    assert rr.x.tolist() == best.tolist()
    assert rr.sample_energies == [pytest.approx(energy(q, best))] * 5


@pytest.mark.parametrize("seed", range(10))
def test_rounded_energy_beats_every_sample(seed):
    q = random_qubo(int(4 + seed % 9), seed)
    states = evolve_meanfield(q, QhdSchedule(steps=50), batch=3, seed=seed)
    rr = sample_and_round(states, q, samples_per_state=8, seed=seed)
    assert len(rr.sample_energies) == 24
    assert rr.energy <= min(rr.sample_energies) + 1e-12
    assert all(b <= a for a, b in zip(rr.trace, rr.trace[1:]))
    es = [c[0] for c in rr.candidates]
    assert es == sorted(es) and es[0] == rr.energy


# -- orchestration ------------------------------------------------------------------------

def test_unique_minimum_0110_is_found():
    u = np.zeros((4, 4))
    u[1, 2] = -0.5
    q = QuboProblem.from_dense(u, np.array([1.0, -1.0, -1.0, 1.0]))
    energies_all = energies(q, bitstrings(4))
    assert np.sum(energies_all == energies_all.min()) == 1
    res = solve_qubo(q, SolverParams(seed=0))
    assert res.x.tolist() == [0, 1, 1, 0]
    assert res.energy == energy(q, [0, 1, 1, 0])
    assert res.stats["backend"] == "exact"


@pytest.mark.parametrize("backend", ["exact", "meanfield"])
def test_solve_is_deterministic(backend):
    q = random_qubo(9, seed=4, density=0.5)
    params = SolverParams(backend=backend, seed=7, batch=3, samples=5, schedule=QhdSchedule(steps=100))
    a, b = solve_qubo(q, params), solve_qubo(q, params)
    assert np.array_equal(a.x, b.x) and a.energy == b.energy
    assert a.stats["best_energy_trace"] == b.stats["best_energy_trace"]


def test_auto_backend_and_params_validation():
    big = random_qubo(EXACT_MAX_DIM + 2, seed=0, density=0.2)
    res = solve_qubo(big, SolverParams(schedule=QhdSchedule(steps=20), samples=2))
    assert res.stats["backend"] == "meanfield"
    with pytest.raises(ValueError):
        solve_qubo(big, SolverParams(backend="exact"))
    with pytest.raises(ValueError):
        SolverParams(backend="gpu")
    with pytest.raises(ValueError):
        SolverParams(batch=0)
    with pytest.raises(ValueError):
        solve_qubo(big, SolverParams(potential_scale=-1.0))


def test_auto_potential_scale_bounds_single_flip_change():
    q = random_qubo(6, seed=2)
    scale = auto_potential_scale(q)
    res = solve_qubo(q, SolverParams(potential_scale="auto", schedule=QhdSchedule(steps=50)))
    assert res.stats["potential_scale"] == scale
    xs = bitstrings(6)
    e = energies(q, xs)
    for i in range(6):
        flipped = xs.copy()
        flipped[:, i] ^= 1
        assert np.max(np.abs(energies(q, flipped) - e)) * scale <= 1.0 + 1e-12
