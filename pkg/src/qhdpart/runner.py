"""Method dispatch, run records and the benchmark loop behind the CLI."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .graph import Graph, Partition, load_edge_list, modularity
from .multilevel import MatchWeightParams, PipelineConfig, partition_graph, random_partition, refine
from .oracles import AnnealParams, brute_force_modularity, simulated_annealing_qubo
from .qhd import QhdSchedule, SolverParams
from .qubo import (VARIABLE_CAP, PenaltyWeights, build_qubo, decode_assignment, encode_assignment,
                   energy, partition_energy)

METHODS = ("qhd", "sa", "brute", "greedy")
CSV_COLUMNS = ["instance", "n", "m", "density_pct", "k", "method", "modularity", "energy",
               "wall_time", "seed", "config_digest", "status", "error"]


@dataclass(frozen=True)
class RunSettings:
    """Everything that determines a run except the input graph and k.

    Penalty weights left as ``None`` fall back to the graph-dependent
    defaults.
    """

    method: str = "qhd"
    seed: int = 0
    theta: int = 512
    sweep_cap: int = 20
    alpha: float = 0.5
    beta: float = 0.5
    schedule: str = "linear"
    t_final: float = 10.0
    steps: int = 1000
    backend: str = "auto"
    batch: int = 4
    samples: int = 16
    keep: int = 8
    phase_noise: float = 0.5
    potential_scale: float | str = 1.0
    sa_sweeps: int = 200
    sa_restart_sweeps: int = 100
    w1: float | None = None
    lambda_a: float | None = None
    lambda_s: float | None = None
    w3: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunSettings":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ValueError(f"unknown config keys: {', '.join(extra)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def weights_for(self, g: Graph) -> PenaltyWeights:
        base = PenaltyWeights.default_for(g)
        over = {k: getattr(self, k) for k in ("w1", "lambda_a", "lambda_s", "w3")
                if getattr(self, k) is not None}
        return replace(base, **over)

    def pipeline(self, k: int, g: Graph) -> PipelineConfig:
        sched = QhdSchedule(t_final=self.t_final, steps=self.steps, preset=self.schedule)
        solver = SolverParams(schedule=sched, backend=self.backend, batch=self.batch,
                              samples=self.samples, seed=self.seed, phase_noise=self.phase_noise,
                              potential_scale=self.potential_scale, keep=self.keep)
        return PipelineConfig(k=k, theta=self.theta, match=MatchWeightParams(self.alpha, self.beta),
                              sweep_cap=self.sweep_cap, solver=solver, weights=self.weights_for(g),
                              seed=self.seed)


@dataclass
class RunOutcome:
    partition: Partition
    modularity: float
    energy: float
    wall_time: float
    report: dict = field(default_factory=dict)


def scored_energy(g: Graph, p: Partition, weights: PenaltyWeights) -> float:
    """QUBO energy of ``p``; goes through ``energy()`` whenever the QUBO fits."""
    if g.node_count * p.k <= VARIABLE_CAP:
        return energy(build_qubo(g, p.k, weights), encode_assignment(p))
    return partition_energy(g, p, weights)


def run_method(g: Graph, k: int, settings: RunSettings) -> RunOutcome:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    t0 = time.perf_counter()
    weights = settings.weights_for(g)
    report: dict = {}
    if settings.method == "qhd":
        p, rep = partition_graph(g, settings.pipeline(k, g))
        report = rep.to_dict()
    elif settings.method == "sa":
        q = build_qubo(g, k, weights)
        res = simulated_annealing_qubo(q, AnnealParams(sweeps=settings.sa_sweeps,
                                                       restart_sweeps=settings.sa_restart_sweeps,
                                                       seed=settings.seed))
        hot = res.solution.reshape(g.node_count, k).sum(axis=1)
        p = decode_assignment(q, res.solution, repair=True, graph=g)
        report = {"sa": {**res.info, "best_energy": res.objective,
                         "one_hot_violations": int(np.count_nonzero(hot != 1))}}
    elif settings.method == "brute":
        res = brute_force_modularity(g, k)
        p = res.solution
        report = {"brute": {"evaluations": res.evaluations, "proven_optimal": True}}
    else:
        stats: dict = {}
        p = refine(g, random_partition(g.node_count, k, settings.seed), settings.sweep_cap, stats)
        report = {"greedy": stats}
    q_val = modularity(g, p)
    e = scored_energy(g, p, weights)
    return RunOutcome(p, q_val, e, time.perf_counter() - t0, report)


def split_timings(obj, path: str = "") -> tuple[object, dict]:
    """Separate timing fields (``*time*`` keys and ``timings`` maps) from a
    nested dict so the rest can be compared byte for byte."""
    if not isinstance(obj, dict):
        return obj, {}
    kept, timings = {}, {}
    for key, val in obj.items():
        name = f"{path}.{key}" if path else key
        if key == "timings" and isinstance(val, dict):
            timings.update({f"{name}.{k}": v for k, v in val.items()})
        elif "time" in key and isinstance(val, (int, float)):
            timings[name] = val
        elif isinstance(val, dict):
            sub, t = split_timings(val, name)
            kept[key] = sub
            timings.update(t)
        else:
            kept[key] = val
    return kept, timings


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def result_document(name: str, g: Graph, k: int, settings: RunSettings, out: RunOutcome) -> dict:
    report, timings = split_timings(_jsonable(out.report))
    timings["wall_time"] = out.wall_time
    return {
        "instance": name,
        "n": g.node_count,
        "m": g.edge_count,
        "k": k,
        "method": settings.method,
        "seed": settings.seed,
        "config": _jsonable(asdict(settings)),
        "config_digest": settings.digest(),
        "modularity": out.modularity,
        "energy": out.energy,
        "assignment": {str(lab): int(c) for lab, c in zip(g.labels, out.partition.assignment)},
        "report": report,
        "timings": timings,
    }


# -- benchmark ----------------------------------------------------------------

@dataclass
class RunRecord:
    instance: str
    n: int | None
    m: int | None
    density_pct: float | None
    k: int
    method: str
    modularity: float | None
    energy: float | None
    wall_time: float
    seed: int
    config_digest: str
    status: str = "ok"
    error: str = ""

    def row(self) -> list:
        return [self._fmt(getattr(self, c)) for c in CSV_COLUMNS]

    @staticmethod
    def _fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)


def density_pct(g: Graph) -> float:
    n = g.node_count
    return 100.0 * 2.0 * g.edge_count / (n * (n - 1)) if n > 1 else 0.0


def read_manifest(path) -> list[tuple[Path, int]]:
    """``path k`` per line; ``#`` starts a comment; relative paths resolve
    against the manifest's directory."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'path k'")
        try:
            k = int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: k must be an integer, got {parts[1]!r}") from None
        p = Path(parts[0])
        entries.append((p if p.is_absolute() else path.parent / p, k))
    return entries


def instance_name(path: Path) -> str:
    name = path.name
    for suffix in (".gz", ".txt", ".csv", ".edgelist", ".edges"):
        name = name.removesuffix(suffix)
    return name


def bench_instance(path: Path, k: int, methods: tuple[str, ...], settings: RunSettings) -> list[RunRecord]:
    """All methods on one instance; failures become error records."""
    name = instance_name(path)
    records = []
    try:
        g = load_edge_list(path)
    except (OSError, ValueError) as exc:
        for m in methods:
            s = replace(settings, method=m)
            records.append(RunRecord(name, None, None, None, k, m, None, None, 0.0, s.seed,
                                     s.digest(), "error", f"{type(exc).__name__}: {exc}"))
        return records
    for m in methods:
        s = replace(settings, method=m)
        t0 = time.perf_counter()
        try:
            out = run_method(g, k, s)
            records.append(RunRecord(name, g.node_count, g.edge_count, density_pct(g), k, m,
                                     out.modularity, out.energy, out.wall_time, s.seed, s.digest()))
        except (ValueError, MemoryError) as exc:
            records.append(RunRecord(name, g.node_count, g.edge_count, density_pct(g), k, m, None, None,
                                     time.perf_counter() - t0, s.seed, s.digest(), "error",
                                     f"{type(exc).__name__}: {exc}"))
    return records


def run_bench(entries: list[tuple[Path, int]], methods: tuple[str, ...], settings: RunSettings,
              csv_path=None, parallel: int = 1) -> list[RunRecord]:
    """Run every instance; rows go to ``csv_path`` in manifest order, one
    instance at a time, as soon as that instance and all before it finish."""
    fh = open(csv_path, "w", newline="") if csv_path else None
    writer = csv.writer(fh, lineterminator="\n") if fh else None
    if writer:
        writer.writerow(CSV_COLUMNS)
        fh.flush()
    results: list[RunRecord] = []
    try:
        if parallel > 1 and len(entries) > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                futures = [pool.submit(bench_instance, p, k, methods, settings) for p, k in entries]
                for fut in futures:
                    recs = fut.result()
                    _emit(writer, fh, recs)
                    results += recs
        else:
            for p, k in entries:
                recs = bench_instance(p, k, methods, settings)
                _emit(writer, fh, recs)
                results += recs
    finally:
        if fh:
            fh.close()
    return results


def _emit(writer, fh, recs: list[RunRecord]):
    if writer is None:
        return
    # one write per instance keeps its rows together
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(r.row() for r in recs)
    fh.write(buf.getvalue())
    fh.flush()


def markdown_summary(records: list[RunRecord], methods: tuple[str, ...]) -> str:
    """Instance / Nodes / Edges / Density % / one modularity column per method."""
    head = ["Instance", "Nodes", "Edges", "Density %"] + [f"{m} Q" for m in methods]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    by_inst: dict[tuple[str, int], dict[str, RunRecord]] = {}
    for r in records:
        by_inst.setdefault((r.instance, r.k), {})[r.method] = r
    for (inst, k), recs in by_inst.items():
        first = next(iter(recs.values()))
        n = "" if first.n is None else f"{first.n:,}"
        m = "" if first.m is None else f"{first.m:,}"
        dens = "" if first.density_pct is None else f"{first.density_pct:.2f}"
        cells = []
        for meth in methods:
            r = recs.get(meth)
            cells.append("error" if r is None or r.modularity is None else f"{r.modularity:.4f}")
        lines.append("| " + " | ".join([f"{inst} (k={k})", n, m, dens] + cells) + " |")
    return "\n".join(lines) + "\n"
