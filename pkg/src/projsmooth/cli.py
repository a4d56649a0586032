"""Command line entry point: ``experiment run`` and ``experiment table``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import ExperimentConfig, format_table, run_monte_carlo, write_outputs


def _parser():
    p = argparse.ArgumentParser(prog="experiment", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte Carlo study")
    run.add_argument("--config", type=Path, help="JSON config (or a previous summary.json)")
    run.add_argument("--runs", type=int)
    run.add_argument("--duration", type=float, help="trajectory length in seconds")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--estimators", help="comma separated subset of vmff,vmfs,gf,gs")
    run.add_argument("-q", "--quiet", action="store_true")

    tab = sub.add_parser("table", help="print the result grid of a summary.json")
    tab.add_argument("--summary", type=Path, required=True)
    return p


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.duration is not None:
        overrides["duration_s"] = args.duration
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.estimators is not None:
        overrides["estimators"] = [e.strip() for e in args.estimators.split(",") if e.strip()]
    cfg = replace(cfg, **overrides)

    table = run_monte_carlo(cfg)
    write_outputs(table, cfg.output_dir)
    with (Path(cfg.output_dir) / "summary.json").open() as fh:
        print(format_table(json.load(fh)))

    empty = [(a, s, e) for _, a, s in cfg.cells() for e in cfg.estimators
             if not table.errors.get((a, s, e))]
    if empty:
        for a, s, e in empty:
            print(f"error: no successful runs for {e} at alpha2={a:g}, s={s:g}", file=sys.stderr)
        return 1
    return 0


def _cmd_table(args) -> int:
    with args.summary.open() as fh:
        print(format_table(json.load(fh)))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        try:
            return _cmd_run(args)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    return _cmd_table(args)


if __name__ == "__main__":
    sys.exit(main())
