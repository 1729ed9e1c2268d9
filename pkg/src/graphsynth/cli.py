"""Command-line front end.

    graphsynth generate --schema FILE --out DIR [--seed N] [--threads N]
    graphsynth experiment --generator planted|rmat --nodes N|--scale S --values K --report FILE

Exit codes: 2 parse error, 3 validation error, 4 execution error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import ExperimentConfig, run_experiment, write_report
from .matcher import BALANCE_RULES
from .pipeline import PipelineError, build_task_dag, execute_plan, infer_sizes, write_dataset
from .rng import DEFAULT_SEED
from .schema import ParseError, parse_schema, validate_schema

EXIT_PARSE = 2
EXIT_VALIDATE = 3
EXIT_EXECUTE = 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphsynth", description="Schema-driven property graph generator.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset from a schema file")
    g.add_argument("--schema", required=True, type=Path)
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
    g.add_argument("--threads", type=_positive, default=1)

    e = sub.add_parser("experiment", help="run the matching-quality experiment")
    e.add_argument("--generator", choices=("planted", "rmat"), required=True)
    size = e.add_mutually_exclusive_group(required=True)
    size.add_argument("--nodes", type=_positive)
    size.add_argument("--scale", type=_positive)
    e.add_argument("--values", type=_positive, required=True)
    e.add_argument("--geo-p", type=float, default=0.4)
    e.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
    e.add_argument("--balance", choices=BALANCE_RULES, default="progressive")
    e.add_argument("--report", required=True, type=Path)
    return ap


def _err(msg: str) -> None:
    print(f"graphsynth: {msg}", file=sys.stderr)


def generate_cmd(schema_path: Path, out_dir: Path, seed: int = DEFAULT_SEED, threads: int = 1) -> int:
    try:
        text = schema_path.read_text(encoding="utf-8")
    except OSError as exc:
        _err(f"cannot read schema {schema_path}: {exc.strerror or exc}")
        return EXIT_PARSE
    try:
        schema = parse_schema(text, base_dir=str(schema_path.resolve().parent))
    except ParseError as exc:
        _err(f"{schema_path}:{exc.line}:{exc.col}: {exc.message}")
        return EXIT_PARSE

    diags = [d for d in validate_schema(schema) if d.severity == "error"]
    if diags:
        for d in diags:
            _err(f"{schema_path}:{d}")
        return EXIT_VALIDATE
    try:
        dag = build_task_dag(schema)
        infer_sizes(dag)
    except PipelineError as exc:
        _err(f"{schema_path}: {exc}")
        return EXIT_VALIDATE

    try:
        ds = execute_plan(dag, seed, threads)
        write_dataset(ds, out_dir)
    except (PipelineError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_EXECUTE
    return 0


def experiment_cmd(args) -> int:
    try:
        cfg = ExperimentConfig(
            generator=args.generator,
            nodes=args.nodes,
            scale=args.scale,
            values=args.values,
            seed=args.seed,
            geo_p=args.geo_p,
            balance=args.balance,
            report=str(args.report),
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_VALIDATE
    try:
        rep = run_experiment(cfg)
        write_report(rep, args.report)
    except (ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_EXECUTE
    print(f"n={rep.n} m={rep.m} k={rep.k} l1={rep.l1_distance:.4f} seconds={rep.seconds:.2f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "generate":
        return generate_cmd(args.schema, args.out, args.seed, args.threads)
    return experiment_cmd(args)


if __name__ == "__main__":
    sys.exit(main())
