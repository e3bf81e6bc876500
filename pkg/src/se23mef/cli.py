"""Command line entry point: ``se23mef run`` and ``se23mef validate``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .filter import FilterDivergenceError
from .harness import ConfigError, load_config, run_monte_carlo, simulate, write_csv

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_IO = 3
EXIT_CONFIG = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="se23mef", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate and write an error trace (or aggregate) CSV")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--trials", type=int, help="override the number of Monte-Carlo trials")
    run.add_argument("--out", help="output CSV path (default: stdout summary only)")
    run.add_argument("-v", "--verbose", action="store_true")

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True)
    return p


def _summary(name: str, trans: float, rot: float, vel: float) -> str:
    return f"{name}: converged mean translation {trans:.4f} m, rotation {rot:.5f} rad, velocity {vel:.4f} m/s"


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if "cannot read" in str(exc) else EXIT_CONFIG

    if args.command == "validate":
        print(f"{args.config}: ok ({config.trajectory.duration:g} s, {len(config.sensors.landmarks)} landmarks, {config.trials} trial(s))")
        return EXIT_OK

    if args.seed is not None:
        config = config.with_seed(args.seed)
    trials = config.trials if args.trials is None else args.trials
    if trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    status = EXIT_OK
    if trials == 1:
        try:
            result = simulate(config)
        except FilterDivergenceError as exc:
            print(f"error: filter diverged: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        data = result.trace
        print(_summary(f"seed {config.seed}", *(data.converged_mean(m) for m in ("trans_err_m", "rot_err_rad", "vel_err_mps"))))
    else:
        try:
            data, _ = run_monte_carlo(config, trials)
        except ValueError as exc:  # every trial diverged
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        for seed, msg in data.flagged:
            print(f"warning: trial seed {seed} diverged: {msg}", file=sys.stderr)
        if data.flagged:
            status = EXIT_DIVERGED
        print(_summary(f"{data.n_ok}/{trials} trials", *(data.converged_mean(m) for m in ("trans_err_m", "rot_err_rad", "vel_err_mps"))))
    logging.info("elapsed %.2f s", time.perf_counter() - start)

    if args.out:
        try:
            write_csv(data, args.out)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
