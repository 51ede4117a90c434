"""Command line entry point: ``dissipate energy|evaluate|select|predict|stratify``.

Options can come from ``--config file.json`` (keys named like the long
flags, with underscores) and from flags; flags win.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .dataset import DatasetError
from .hysteresis import HysteresisError
from .metrics import MetricError
from .pipeline import COMMANDS, EXIT_INVALID, ConfigError, RunConfig
from .regress import RegressionError
from .select import SelectionError
from .transform import TransformError

VALIDATION_ERRORS = (ConfigError, DatasetError, HysteresisError, MetricError, RegressionError,
                     SelectionError, TransformError, FileNotFoundError)


def _features(text):
    return [f.strip() for f in text.split(",") if f.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="dissipate",
                                description="Energy dissipation of RC walls: NCDE extraction, "
                                            "regression trials and feature selection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON file with run options")
    inputs = p.add_argument_group("inputs")
    inputs.add_argument("--db", help="walls CSV database")
    inputs.add_argument("--curves", help="directory of <id>.csv load-displacement curves")
    inputs.add_argument("--heights", help="CSV with id,hw_mm columns (walls.csv works)")
    inputs.add_argument("--height", type=float, help="wall height (mm) for every curve")
    inputs.add_argument("--model", help="model JSON written by evaluate")
    inputs.add_argument("--specimens", help="CSV of specimens to predict")
    inputs.add_argument("--predictions", help="predictions or scatter CSV to stratify")
    run = p.add_argument_group("run")
    run.add_argument("--method", choices=["lr", "lasso", "nca", "gpr"])
    run.add_argument("--transform", choices=["none", "log", "boxcox"])
    run.add_argument("--transform-fit", dest="transform_fit", choices=["per-trial", "global"])
    run.add_argument("--trials", type=int)
    run.add_argument("--rank-trials", dest="rank_trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--features", type=_features, help="comma-separated feature ids")
    run.add_argument("--selection", choices=["all", "ranked-forward", "sbe", "explicit"])
    run.add_argument("--tolerance", type=float, help="R² tolerance for subset choice")
    run.add_argument("--train-fraction", dest="train_fraction", type=float)
    run.add_argument("--failure-threshold", dest="failure_threshold", type=float)
    run.add_argument("--n-jobs", dest="n_jobs", type=int, help="worker processes")
    run.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args):
    base = RunConfig.from_json(args.config).__dict__ if args.config else {}
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "verbose")}
    return RunConfig.from_dict({**base, **flags})


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except VALIDATION_ERRORS as exc:
        print(f"dissipate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TypeError, ValueError) as exc:
        print(f"dissipate {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
