"""Command line entry point: ``rcs run | analyze | ingest-check | oracle``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import bound_rhs, exhaustive_q
from .dist import ModelGroup, overlap_z
from .errors import RCSError
from .harness.config import PRESETS, ExperimentGrid, load_config, preset, s_for
from .harness.ingest import ingest_distributions
from .harness.report import aggregate_table, emit_results, format_table, read_results_csv
from .harness.runner import run_grid

log = logging.getLogger("rcs")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcs", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per cell")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and write results")
    run.add_argument("--config", type=Path, help="YAML grid config")
    run.add_argument("--preset", choices=sorted(PRESETS), help="named trial budget")
    run.add_argument("--seed", type=_u64, help="base seed (overrides config)")
    run.add_argument("--trials", type=_positive, help="trials per cell (overrides config/preset)")
    run.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    run.add_argument("--format", choices=("csv", "plotdata"), default="csv")
    run.add_argument("--jobs", type=_positive, default=1, help="worker processes for cells")

    analyze = sub.add_parser("analyze", help="summarise a results CSV per regime")
    analyze.add_argument("results", type=Path, help="results.csv, or a directory holding one")

    check = sub.add_parser("ingest-check", help="validate a distribution file")
    check.add_argument("path", type=Path)

    oracle = sub.add_parser("oracle", help="exact unsafe-delivery probability of RCS on a small instance")
    oracle.add_argument("path", type=Path, help="distribution file; every row is one model")
    oracle.add_argument("--rounds", "-R", type=_positive, default=2, help="rejection budget R")
    oracle.add_argument("--s", type=_positive, help="presumed safe count (default ceil((n+1)/2))")
    return parser


def _grid(args) -> ExperimentGrid:
    if args.config:
        grid = load_config(args.config, preset(args.preset) if args.preset else None)
        if args.preset:
            grid = grid.replace(**PRESETS[args.preset])
    elif args.preset:
        grid = preset(args.preset)
    else:
        grid = ExperimentGrid()
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.trials is not None:
        changes["trials_per_cell"] = args.trials
    return grid.replace(**changes) if changes else grid


def cmd_run(args) -> int:
    grid = _grid(args)
    results = run_grid(grid, workers=args.jobs)
    for path in emit_results(results, args.format, args.out):
        log.info("wrote %s", path)
    failed = [r for r in results if r.failure]
    for res in failed:
        print(f"cell {res.key} failed: {res.failure}", file=sys.stderr)
    print(f"{len(results)} rows, {len(failed)} failed, written to {args.out}")
    return 1 if failed else 0


def cmd_analyze(args) -> int:
    path = args.results / "results.csv" if args.results.is_dir() else args.results
    print(format_table(aggregate_table(read_results_csv(path))))
    return 0


def cmd_ingest_check(args) -> int:
    space, dists = ingest_distributions(args.path)
    print(f"ok: space size {space.size}, {len(space.unsafe)} unsafe, {len(dists)} models")
    return 0


def cmd_oracle(args) -> int:
    space, dists = ingest_distributions(args.path)
    s = args.s or s_for(len(dists))
    group = ModelGroup.from_models(dists, s, space)
    q = exhaustive_q(group, args.rounds)
    rhs = bound_rhs(group, args.rounds)
    print(f"n={group.n} s={s} R={args.rounds} Z={overlap_z(group):.6g}")
    print(f"q_U = {q} ({float(q):.6g})")
    print(f"R*mu(U) + (1-Z)^R = {float(rhs):.6g} ({'holds' if q <= rhs else 'VIOLATED'})")
    return 0


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "ingest-check": cmd_ingest_check, "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (RCSError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
