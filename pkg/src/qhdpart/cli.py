"""``qhdpart`` command line: partition, bench, qubo."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .graph import load_edge_list
from .qubo import build_qubo, write_coo
from .runner import (METHODS, RunSettings, instance_name, markdown_summary, read_manifest,
                     result_document, run_bench, run_method)

log = logging.getLogger("qhdpart")


class CliError(Exception):
    pass


def _settings(args) -> RunSettings:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(base, dict):
            raise CliError(f"config {args.config} must hold a JSON object")
    settings = RunSettings.from_dict(base)
    # flags given on the command line override the config file
    flag_map = {"method": "method", "seed": "seed", "theta": "theta", "schedule": "schedule",
                "t_final": "t_final", "steps": "steps", "backend": "backend", "batch": "batch",
                "samples": "samples", "sa_sweeps": "sa_sweeps", "w1": "w1", "lambda_a": "lambda_a",
                "lambda_s": "lambda_s", "w3": "w3"}
    over = {dst: getattr(args, src) for src, dst in flag_map.items()
            if getattr(args, src, None) is not None}
    return replace(settings, **over)


def _load(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"input file not found: {path}")
    try:
        return load_edge_list(p)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_partition(args) -> int:
    settings = _settings(args)
    g = _load(args.input)
    name = instance_name(Path(args.input))
    try:
        out = run_method(g, args.k, settings)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    doc = result_document(name, g, args.k, settings, out)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    print(f"{name} {g.node_count} {g.edge_count} {args.k} {settings.method} "
          f"{out.modularity:.6f} {out.wall_time:.3f}")
    return 0


def cmd_bench(args) -> int:
    settings = _settings(args)
    try:
        entries = read_manifest(args.manifest)
    except OSError as exc:
        raise CliError(f"cannot read manifest {args.manifest}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise CliError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    records = run_bench(entries, methods, settings, args.csv, args.parallel)
    md = markdown_summary(records, methods)
    if args.markdown:
        Path(args.markdown).write_text(md)
    else:
        sys.stdout.write(md)
    failed = sum(r.status != "ok" for r in records)
    if failed:
        log.warning("%d of %d runs failed; see the error column", failed, len(records))
    return 0


def cmd_qubo(args) -> int:
    settings = _settings(args)
    g = _load(args.input)
    weights = settings.weights_for(g)
    try:
        q = build_qubo(g, args.k, weights)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    write_coo(q, args.output, fold_linear=args.fold_linear)
    sidecar = Path(args.sidecar) if args.sidecar else Path(str(args.output) + ".json")
    meta = {
        "instance": instance_name(Path(args.input)),
        "dim": q.dim,
        "nnz": int(q.quadratic.nnz),
        "offset": q.offset,
        "layout": {"n": q.n, "k": q.k, "index": "i*k+c"},
        "labels": [str(lab) for lab in g.labels],
        "weights": asdict(weights),
        "fold_linear": bool(args.fold_linear),
        "qubo_file": Path(args.output).name,
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.output} (dim {q.dim}, {q.quadratic.nnz} quadratic terms) and {sidecar}")
    return 0


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of run settings; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--theta", type=int, help="coarsening threshold (base graph size)")
    p.add_argument("--schedule", choices=["linear", "power"])
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--backend", choices=["auto", "exact", "meanfield"])
    p.add_argument("--batch", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--sa-sweeps", dest="sa_sweeps", type=int)


def _add_penalty_flags(p: argparse.ArgumentParser):
    p.add_argument("--w1", type=float, help="modularity weight (default 1)")
    p.add_argument("--lambda-a", dest="lambda_a", type=float, help="one-hot penalty")
    p.add_argument("--lambda-s", dest="lambda_s", type=float, help="balance penalty")
    p.add_argument("--w3", type=float, help="intra-group edge bonus (default 0)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhdpart", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition one graph")
    p.add_argument("--input", required=True, help="edge list (u v [w] per line, .gz/.csv ok)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--output", help="write the JSON result here")
    _add_solver_flags(p)
    _add_penalty_flags(p)
    p.set_defaults(func=cmd_partition)

    b = sub.add_parser("bench", help="run methods over a manifest of instances")
    b.add_argument("--manifest", required=True, help="lines of 'path k'; '#' comments")
    b.add_argument("--methods", default="qhd", help="comma-separated, e.g. qhd,sa")
    b.add_argument("--csv", help="CSV output path")
    b.add_argument("--markdown", help="Markdown summary path (default: stdout)")
    b.add_argument("--parallel", type=int, default=1)
    _add_solver_flags(b)
    _add_penalty_flags(b)
    b.set_defaults(func=cmd_bench, method=None)

    q = sub.add_parser("qubo", help="export the QUBO of a graph in COO text format")
    q.add_argument("--input", required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--output", required=True, help="COO output path")
    q.add_argument("--sidecar", help="JSON sidecar path (default: <output>.json)")
    q.add_argument("--fold-linear", action="store_true",
                   help="add linear terms onto the diagonal instead of 'b' lines")
    q.add_argument("--config")
    _add_penalty_flags(q)
    q.set_defaults(func=cmd_qubo)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"qhdpart {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"qhdpart {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
