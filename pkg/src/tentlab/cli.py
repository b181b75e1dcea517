"""Command-line runner: ``tentlab run <config.json>`` and ``tentlab list``.

Exit status is 0 when every gate passes, 1 on a gate failure and 2 for an
invalid config or unknown experiment.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2


def load_schema() -> dict:
    return json.loads(resources.files("tentlab").joinpath("schema.json").read_text())


def validate_config(cfg) -> list:
    """Schema errors as readable strings (empty when valid)."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(load_schema())
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
            for e in sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))]


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def format_cell(v) -> str:
    """Stable text for a CSV cell: floats round-trip via ``repr``."""
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v)
    if isinstance(v, str):
        return v
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy without wall-clock entries."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def summary_document(cfg: dict, result, version: str) -> dict:
    return {
        "experiment": result.name,
        "version": version,
        "config_sha256": config_hash(cfg),
        "seed": int(cfg.get("seed", 0)),
        "passed": result.passed,
        "gates": [g.to_json(deterministic=True) for g in result.gates],
        "summary": _clean(result.summary),
    }


def _threads(arg) -> int | None:
    value = arg if arg is not None else os.environ.get("TENTLAB_THREADS")
    if value in (None, ""):
        return None
    n = int(value)
    if n < 1:
        raise ValueError("thread count must be positive")
    return n


def cmd_list(args) -> int:
    from .experiments import EXPERIMENTS

    for name, (_, desc) in EXPERIMENTS.items():
        print(f"{name:16s} {desc}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"schema error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        threads = _threads(args.threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from threadpoolctl import threadpool_limits

    from . import __version__
    from .experiments import COLUMNS, run_experiment

    with threadpool_limits(limits=threads):
        try:
            result = run_experiment(cfg)
        except (KeyError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    outputs = cfg.get("output", {})
    csv_path = out / outputs.get("csv", f"{result.name}.csv")
    json_path = out / outputs.get("summary", f"{result.name}.json")
    csv_path.write_text(rows_to_csv(result.rows, COLUMNS))
    json_path.write_text(json.dumps(summary_document(cfg, result, __version__), indent=2, sort_keys=True) + "\n")

    for g in result.gates:
        status = "PASS" if g.passed else "FAIL"
        print(f"{status} {g.name}: {g.value:.6g} {g.op} {g.threshold:.6g}")
    if "seconds" in result.summary:
        print(f"elapsed {result.summary['seconds']:.1f} s")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if result.passed else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tentlab", description="Tent-space and Hardy-space experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--out", help="output directory (default: current directory)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--threads", type=int, help="BLAS thread limit (fallback: TENTLAB_THREADS)")
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help="list available experiments")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
