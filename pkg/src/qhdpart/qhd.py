"""Simulated Quantum Hamiltonian Descent on QUBO problems.

The wavefunction lives on the binary grid ``{0,1}^dim`` and evolves under::

    H(t) = kinetic(t) * (-1/2 L) + potential(t) * F

where ``L`` is the tensor sum of per-variable two-point Laplacians
``[[-1, 1], [1, -1]]`` and ``F`` is the diagonal of QUBO energies.  Each time
step is a Strang splitting (half kinetic, full potential, half kinetic); the
kinetic factor is the closed-form 2x2 propagator applied along every
variable axis, so a step is nothing but small matrix products and
elementwise phases.

Two backends:

* ``exact``: the full ``2**dim`` state, for ``dim <= 14``.
* ``meanfield``: a product state of ``dim`` two-level systems, each feeling
  the QUBO through an effective field built from the others' ``<x_j>``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .qubo import QuboProblem, energies

EXACT_MAX_DIM = 14

Backend = Literal["auto", "exact", "meanfield"]


@dataclass(frozen=True)
class QhdSchedule:
    """Time grid plus kinetic/potential damping coefficients.

    ``preset="linear"``: kinetic ``1 - t/T``, potential ``t/T``.
    ``preset="power"``: kinetic ``(t + t0)**-p``, potential ``(t + t0)**p``.
    ``preset="custom"`` takes the two coefficient callables directly.
    """

    t_final: float = 10.0
    steps: int = 1000
    preset: str = "linear"
    t0: float = 0.1
    power: float = 3.0
    kinetic_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    potential_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.t_final > 0 and np.isfinite(self.t_final)):
            raise ValueError("t_final must be positive and finite")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.preset not in ("linear", "power", "custom"):
            raise ValueError(f"unknown schedule preset {self.preset!r}")
        if self.preset == "custom" and (self.kinetic_fn is None or self.potential_fn is None):
            raise ValueError("custom schedules need kinetic_fn and potential_fn")

    @property
    def dt(self) -> float:
        return self.t_final / self.steps

    def kinetic(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.preset == "linear":
            return np.clip(1.0 - t / self.t_final, 0.0, None)
        if self.preset == "power":
            return (t + self.t0) ** (-self.power)
        return np.broadcast_to(np.asarray(self.kinetic_fn(t), dtype=np.float64), t.shape)

    def potential(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.preset == "linear":
            return np.clip(t / self.t_final, 0.0, None)
        if self.preset == "power":
            return (t + self.t0) ** self.power
        return np.broadcast_to(np.asarray(self.potential_fn(t), dtype=np.float64), t.shape)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.steps + 1)

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) * self.dt

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Kinetic and potential weights at the step midpoints, validated."""
        tm = self.midpoints()
        kin, pot = self.kinetic(tm), self.potential(tm)
        for name, arr in (("kinetic", kin), ("potential", pot)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} coefficient is not finite on the time grid")
            if np.any(arr < 0):
                raise ValueError(f"{name} coefficient is negative on the time grid")
        return kin, pot

    def to_dict(self) -> dict:
        return {"preset": self.preset, "t_final": self.t_final, "steps": self.steps,
                "t0": self.t0, "power": self.power}


@dataclass
class WaveState:
    """Either a full ``(2**dim,)`` amplitude vector or ``(dim, 2)`` per-variable qubits."""

    backend: Literal["exact", "meanfield"]
    amplitudes: np.ndarray
    dim: int

    def probabilities(self) -> np.ndarray:
        """Exact: distribution over bitstrings.  Mean-field: ``(dim, 2)`` marginals."""
        return np.abs(self.amplitudes) ** 2

    def marginals(self) -> np.ndarray:
        """``P(x_i = 1)`` for every variable."""
        if self.backend == "meanfield":
            return np.abs(self.amplitudes[:, 1]) ** 2
        p = self.probabilities().reshape((2,) * self.dim)
        axes = tuple(range(self.dim))
        return np.array([p.sum(axis=axes[:i] + axes[i + 1:])[1] for i in range(self.dim)])

    def norms(self) -> np.ndarray:
        if self.backend == "meanfield":
            return np.linalg.norm(self.amplitudes, axis=1)
        return np.array([np.linalg.norm(self.amplitudes)])


# -- operators ------------------------------------------------------------------

def bitstrings(dim: int) -> np.ndarray:
    """All ``2**dim`` vectors; row ``s`` has variable 0 as its most significant bit."""
    s = np.arange(1 << dim, dtype=np.int64)
    shifts = np.arange(dim - 1, -1, -1, dtype=np.int64)
    return ((s[:, None] >> shifts) & 1).astype(np.int8)


def potential_diagonal(q: QuboProblem) -> np.ndarray:
    """``F`` for the exact backend: energy of every bitstring."""
    if q.dim > EXACT_MAX_DIM + 10:
        raise ValueError(f"dim {q.dim} too large for a full potential diagonal")
    return energies(q, bitstrings(q.dim))


def apply_laplacian(psi: np.ndarray, dim: int) -> np.ndarray:
    """``L psi`` with ``L`` the tensor sum of ``[[-1, 1], [1, -1]]`` stencils."""
    v = np.asarray(psi)
    out = np.zeros_like(v)
    for ax in range(dim):
        a = v.reshape(1 << ax, 2, -1)
        o = out.reshape(1 << ax, 2, -1)
        diff = a[:, 1, :] - a[:, 0, :]
        o[:, 0, :] += diff
        o[:, 1, :] -= diff
    return out


def _kinetic_factors(kin: float, tau: float) -> tuple[complex, complex]:
    # exp(-i tau (kin/2)(I - X)) = e^{-i th} (cos th I + i sin th X), th = tau*kin/2
    th = 0.5 * kin * tau
    ph = np.exp(-1j * th)
    return ph * np.cos(th), ph * 1j * np.sin(th)


def _kinetic_exact(psi: np.ndarray, dim: int, c: complex, s: complex):
    for ax in range(dim):
        v = psi.reshape(1 << ax, 2, -1)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :].copy()
        v[:, 0, :] = c * a0 + s * a1
        v[:, 1, :] = s * a0 + c * a1


def evolve_exact(q: QuboProblem, sched: QhdSchedule | None = None, seed: int = 0,
                 potential_scale: float = 1.0, observe: Callable | None = None) -> WaveState:
    """Full-state evolution from the uniform superposition.

    ``seed`` is accepted for interface symmetry; the exact backend is
    deterministic.  ``potential_scale`` multiplies ``F``.  ``observe(step,
    psi)`` is called after every step with the live state (do not modify).
    """
    del seed
    sched = sched or QhdSchedule()
    if q.dim > EXACT_MAX_DIM:
        raise ValueError(f"exact backend supports dim <= {EXACT_MAX_DIM}, got {q.dim}")
    kin, pot = sched.coefficients()
    dim, dt = q.dim, sched.dt
    f = potential_diagonal(q) * potential_scale
    psi = np.full(1 << dim, (1 << dim) ** -0.5, dtype=np.complex128)
    for step, (kn, pt) in enumerate(zip(kin, pot)):
        c, s = _kinetic_factors(kn, 0.5 * dt)
        _kinetic_exact(psi, dim, c, s)
        psi *= np.exp(-1j * (pt * dt) * f)
        _kinetic_exact(psi, dim, c, s)
        if observe is not None:
            observe(step, psi)
    return WaveState("exact", psi, dim)


def initial_meanfield(dim: int, batch: int, seed: int, phase_noise: float) -> np.ndarray:
    """``(batch, dim, 2)`` uniform qubits; members after the first get random
    relative phases with standard deviation ``phase_noise``."""
    psi = np.full((batch, dim, 2), 2 ** -0.5, dtype=np.complex128)
    seqs = np.random.SeedSequence(seed).spawn(batch)
    for b in range(1, batch):
        rng = np.random.default_rng(seqs[b])
        psi[b, :, 1] *= np.exp(1j * phase_noise * rng.standard_normal(dim))
    return psi


def effective_fields(q: QuboProblem, probs: np.ndarray) -> np.ndarray:
    """``eps_i = U_ii + b_i + sum_{j != i} S_ij <x_j>`` for ``(batch, dim)`` probabilities."""
    return q.local_fields() + (q.coupling @ probs.T).T


def evolve_meanfield(q: QuboProblem, sched: QhdSchedule | None = None, batch: int = 1,
                     seed: int = 0, phase_noise: float = 0.5,
                     potential_scale: float = 1.0, observe: Callable | None = None) -> list[WaveState]:
    """Product-state evolution of ``batch`` independent members.

    Fields are refreshed from the current ``<x_j>`` before every potential
    step.  Memory is ``O(batch * dim)`` plus the sparse couplings.
    ``observe(step, psi)`` sees the live ``(batch, dim, 2)`` array.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    sched = sched or QhdSchedule()
    kin, pot = sched.coefficients()
    dt = sched.dt
    psi = initial_meanfield(q.dim, batch, seed, phase_noise)
    for step, (kn, pt) in enumerate(zip(kin, pot)):
        c, s = _kinetic_factors(kn, 0.5 * dt)
        _kinetic_meanfield(psi, c, s)
        eps = effective_fields(q, np.abs(psi[..., 1]) ** 2) * potential_scale
        psi[..., 1] *= np.exp(-1j * (pt * dt) * eps)
        _kinetic_meanfield(psi, c, s)
        if observe is not None:
            observe(step, psi)
    return [WaveState("meanfield", psi[b].copy(), q.dim) for b in range(batch)]


def _kinetic_meanfield(psi: np.ndarray, c: complex, s: complex):
    a0 = psi[..., 0].copy()
    a1 = psi[..., 1].copy()
    psi[..., 0] = c * a0 + s * a1
    psi[..., 1] = s * a0 + c * a1


# -- rounding -------------------------------------------------------------------

def greedy_descent(q: QuboProblem, x, trace: list | None = None) -> tuple[np.ndarray, float]:
    """Steepest single-bit-flip descent until no flip lowers the energy.

    Each step flips the bit with the most negative energy change; equal
    changes go to the lowest index.

    When ``trace`` is a list, the energy after every flip is appended to it.
    """
    x = np.asarray(x, dtype=np.int8).copy()
    s = q.coupling
    fields = q.local_fields() + s @ x.astype(np.float64)
    e = float(energies(q, x[None, :])[0])
    tol = 1e-12 * max(1.0, float(np.abs(q.linear).max(initial=0.0)),
                      float(np.abs(q.quadratic.data).max(initial=0.0)))
    indptr, indices, data = s.indptr, s.indices, s.data
    while True:
        delta = np.where(x == 1, -fields, fields)
        i = int(np.argmin(delta))
        if delta[i] >= -tol:
            break
        sign = 1.0 if x[i] == 0 else -1.0
        x[i] ^= 1
        e += float(delta[i])
        lo, hi = indptr[i], indptr[i + 1]
        fields[indices[lo:hi]] += sign * data[lo:hi]
        if trace is not None:
            trace.append(e)
    # recompute to shed accumulated rounding
    return x, float(energies(q, x[None, :])[0])


@dataclass
class RoundingResult:
    x: np.ndarray
    energy: float
    trace: list = field(default_factory=list)
    sample_energies: list = field(default_factory=list)
    candidates: list = field(default_factory=list)  # [(energy, x)], best first, distinct


def sample_and_round(states: Sequence[WaveState], q: QuboProblem, samples_per_state: int = 16,
                     seed: int = 0, keep: int = 1) -> RoundingResult:
    """Sample bitstrings from each state, greedy-descend each, keep the best.

    ``trace`` is the running best energy after each sample and
    ``sample_energies`` the pre-descent energy of each sample.  The ``keep``
    lowest-energy distinct descended vectors are returned as ``candidates``.
    """
    if not states:
        raise ValueError("no states to sample")
    if samples_per_state < 1:
        raise ValueError("samples_per_state must be >= 1")
    seqs = np.random.SeedSequence([seed, 0x5A]).spawn(len(states))
    best_x, best_e = None, np.inf
    trace, pre = [], []
    pool: dict[bytes, tuple[float, np.ndarray]] = {}
    for st, ss in zip(states, seqs):
        rng = np.random.default_rng(ss)
        if st.backend == "exact":
            p = st.probabilities()
            p = p / p.sum()
            picks = rng.choice(p.size, size=samples_per_state, p=p)
            shifts = np.arange(st.dim - 1, -1, -1)
            xs = ((picks[:, None] >> shifts) & 1).astype(np.int8)
        else:
            p1 = st.marginals()
            xs = (rng.random((samples_per_state, st.dim)) < p1).astype(np.int8)
        pre.extend(energies(q, xs).tolist())
        for xv in xs:
            xd, ed = greedy_descent(q, xv)
            if ed < best_e:
                best_x, best_e = xd, ed
            trace.append(best_e)
            pool.setdefault(xd.tobytes(), (ed, xd))
    ranked = sorted(pool.values(), key=lambda c: (c[0], c[1].tobytes()))[:max(keep, 1)]
    return RoundingResult(best_x, float(best_e), trace, pre, ranked)


# -- orchestration ----------------------------------------------------------------

@dataclass(frozen=True)
class SolverParams:
    schedule: QhdSchedule = field(default_factory=QhdSchedule)
    backend: Backend = "auto"
    batch: int = 4
    samples: int = 16
    seed: int = 0
    phase_noise: float = 0.5
    potential_scale: float | str = 1.0
    keep: int = 8

    def __post_init__(self):
        if self.backend not in ("auto", "exact", "meanfield"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.batch < 1 or self.samples < 1 or self.keep < 1:
            raise ValueError("batch, samples and keep must be >= 1")

    def to_dict(self) -> dict:
        return {"schedule": self.schedule.to_dict(), "backend": self.backend, "batch": self.batch,
                "samples": self.samples, "seed": self.seed, "phase_noise": self.phase_noise,
                "potential_scale": self.potential_scale, "keep": self.keep}


@dataclass
class QhdResult:
    x: np.ndarray
    energy: float
    stats: dict
    candidates: list = field(default_factory=list)


def solve_qubo(q: QuboProblem, params: SolverParams | None = None) -> QhdResult:
    params = params or SolverParams()
    backend = params.backend
    if backend == "auto":
        backend = "exact" if q.dim <= EXACT_MAX_DIM else "meanfield"
    scale = resolve_potential_scale(q, params.potential_scale)
    t0 = time.perf_counter()
    if backend == "exact":
        states = [evolve_exact(q, params.schedule, params.seed, scale)]
    else:
        states = evolve_meanfield(q, params.schedule, params.batch, params.seed,
                                  params.phase_noise, scale)
    t1 = time.perf_counter()
    rr = sample_and_round(states, q, params.samples, params.seed, params.keep)
    t2 = time.perf_counter()
    stats = {
        "backend": backend,
        "dim": q.dim,
        "steps": params.schedule.steps,
        "batch": len(states),
        "samples": params.samples,
        "potential_scale": scale,
        "best_energy_trace": rr.trace,
        "evolve_time": t1 - t0,
        "round_time": t2 - t1,
        "wall_time": t2 - t0,
    }
    return QhdResult(rr.x, rr.energy, stats, rr.candidates)


def resolve_potential_scale(q: QuboProblem, scale: float | str) -> float:
    if scale == "auto":
        return auto_potential_scale(q)
    scale = float(scale)
    if not (scale > 0 and np.isfinite(scale)):
        raise ValueError("potential_scale must be positive")
    return scale


def auto_potential_scale(q: QuboProblem) -> float:
    """``1 / B`` with ``B`` bounding any single-flip energy change, so the
    scaled potential moves by at most one unit per flip."""
    s = q.coupling
    row = np.asarray(abs(s).sum(axis=1)).ravel()
    bound = float(np.abs(q.local_fields()).max(initial=0.0) + row.max(initial=0.0))
    return 1.0 / bound if bound > 0 else 1.0
