"""Command line entry point.

    mmbackhaul run CONFIG [--out DIR] [--seed N] [--schedule-log]
    mmbackhaul sweep CONFIG --out FILE [--load-start ...] [--seeds N] [--jobs J]
    mmbackhaul validate RUN_DIR

Exit codes: 0 success, 1 configuration error, 2 runtime assertion failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .config import PRESETS, ScenarioConfig
from .checker import validate_schedule_log
from .errors import ConfigError
from .runner import run_scenario, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmbackhaul", description="Distributed mmWave backhaul scheduler simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config", help="JSON scenario file")
    run.add_argument("--out", help="output directory (default: config 'output')")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--schedule-log", action="store_true", help="also write schedules.jsonl")

    sw = sub.add_parser("sweep", help="sweep offered load over presets and seeds")
    sw.add_argument("config", help="JSON scenario file used as the base")
    sw.add_argument("--out", required=True, help="summary CSV path")
    sw.add_argument("--load-start", type=float, default=0.67e9)
    sw.add_argument("--load-stop", type=float, default=3.33e9)
    sw.add_argument("--load-steps", type=int, default=5, help="number of evenly spaced load points")
    sw.add_argument("--seeds", type=int, default=50, help="number of seeds, starting at the base seed")
    sw.add_argument("--presets", nargs="+", default=list(PRESETS), choices=PRESETS)
    sw.add_argument("--jobs", type=int, default=1)

    val = sub.add_parser("validate", help="check a run's schedule log")
    val.add_argument("run_dir")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = ScenarioConfig.load(args.config)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            if args.schedule_log:
                cfg = replace(cfg, schedule_log=True)
            _, paths = run_scenario(cfg, args.out)
            print(paths["metrics"])
        elif args.command == "sweep":
            cfg = ScenarioConfig.load(args.config)
            if args.load_steps < 1 or args.seeds < 1 or args.jobs < 1:
                raise ConfigError("sweep", "load-steps, seeds and jobs must be positive")
            loads = [float(x) for x in np.linspace(args.load_start, args.load_stop, args.load_steps)]
            seeds = list(range(cfg.seed, cfg.seed + args.seeds))
            run_sweep(cfg, loads, seeds, args.presets, args.out, jobs=args.jobs)
            print(args.out)
        else:
            report = validate_schedule_log(args.run_dir)
            for v in report.violations:
                print(v)
            for w in report.warnings:
                print(f"warning: {w}", file=sys.stderr)
            print(f"{report.checked} schedules checked, {len(report.violations)} violations")
            return EXIT_OK if report.ok else EXIT_RUNTIME
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:
        print(f"runtime assertion failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
