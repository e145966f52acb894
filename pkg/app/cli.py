"""
Command-line front end
Runs seeded experiments and Saltelli sensitivity estimates, writing CSV to
stdout (or --out) and logs to stderr.

Usage:
    python -m app.cli run --preset A --seeds 1-20 --budget 100
    python -m app.cli run --spec specs/experiment_c.json --out results_c.csv
    python -m app.cli sensitivity --objective rosenbrock3 --n-base 32768 --seed 0
"""
from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys

from pydantic import ValidationError

from app.config import settings, setup_logging
from app.errors import ConfigurationError, DimensionMismatchError, SobolOptError, UnknownObjectiveError
from app.services import experiments

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sobolopt",
        description="Derivative-free global minimization with Sobol-index constraints",
    )
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment over several seeds")
    run.add_argument("--spec", help="JSON experiment spec file")
    run.add_argument("--preset", help="constraint preset A|B|C|D (replaces the file's constraint source)")
    run.add_argument("--seeds", help="seed list or range, e.g. 1-20 or 1,2,5")
    run.add_argument("--budget", type=int, help="number of certification solves per run")
    run.add_argument("--degree", type=int, help="maximal degree D per coordinate")
    run.add_argument("--workers", type=int, help=f"process pool size (default {settings.MAX_WORKERS})")
    run.add_argument("--out", help="CSV output path (default stdout)")

    sens = sub.add_parser("sensitivity", help="Saltelli estimate of first-order and total indices")
    sens.add_argument("--objective", default="rosenbrock3", help="objective id")
    sens.add_argument("--n-base", type=int, default=None, help=f"base sample size (default {settings.SALTELLI_N_BASE})")
    sens.add_argument("--seed", type=int, default=0)
    sens.add_argument("--d", type=int, default=None, help="dimension for the synthetic objectives")
    sens.add_argument("--out", help="CSV output path (default stdout)")
    return parser


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"💾 Wrote {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "preset": args.preset,
        "seeds": args.seeds,
        "budget_solves": args.budget,
        "degree": args.degree,
        "out": args.out,
    }
    spec = experiments.load_spec(args.spec, overrides)
    results = experiments.run_experiment(spec, max_workers=args.workers)
    _write(experiments.results_csv(spec.label, results), spec.out)
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    n_base = settings.SALTELLI_N_BASE if args.n_base is None else args.n_base
    if n_base < 2:
        raise ConfigurationError(f"--n-base must be at least 2, got {n_base}")
    try:
        est = experiments.run_sensitivity(args.objective, n_base, args.seed, d=args.d)
    except (UnknownObjectiveError, DimensionMismatchError) as e:
        raise ConfigurationError(f"--objective / --d: {e}") from e
    _write(experiments.sensitivity_csv(est), args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sensitivity": cmd_sensitivity}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"❌ Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SobolOptError, ArithmeticError, ValueError, OSError) as e:
        logger.error(f"❌ Run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
