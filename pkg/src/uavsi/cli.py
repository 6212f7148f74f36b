"""Command line entry point: ``sim run|experiment|validate``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, format_table, run_experiment, run_to_dir
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

log = logging.getLogger("uavsi")


def _setup_logging() -> None:
    level = os.environ.get("SIM_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="UAV mission-critical 5G simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--horizon", type=float, help="horizon in seconds")

    exp = sub.add_parser("experiment", help="run a built-in experiment")
    exp.add_argument("name", choices=sorted(EXPERIMENTS))
    exp.add_argument("--out", type=Path, default=None)
    exp.add_argument("--seed", type=int)
    exp.add_argument("--horizon", type=float)
    exp.add_argument("--jobs", type=int, default=1, help="run variants in parallel worker processes")

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("scenario", type=Path)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            doc = load_scenario(args.scenario)
            print(f"{args.scenario}: ok ({len(doc.flows)} flows, {len(doc.topology.nodes)} nodes)")
            return EXIT_OK
        if args.command == "run":
            doc = load_scenario(args.scenario)
            if args.seed is not None:
                doc.seed = args.seed
            if args.horizon is not None:
                doc.horizon_s = args.horizon
            run_to_dir(doc, args.out)
            log.info("wrote metrics.csv, summary.json, si_log.csv to %s", args.out)
            return EXIT_OK
        out = args.out or Path("out") / args.name
        result = run_experiment(args.name, out, args.seed, args.horizon, args.jobs)
        print(format_table(result))
        return EXIT_OK
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any failure mid-run maps to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
