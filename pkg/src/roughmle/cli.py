"""Command line entry point: ``roughmle <experiment> --config <file>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import EXPERIMENTS, parse_config
from .errors import ConfigError, NumericalDomainError, SingularInformationError
from .experiments import emit_table, run_experiment, table_to_csv

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughmle", description="Run a drift-estimation experiment and write a CSV table."
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", help="output CSV (overrides the config's output; default stdout)")
    parser.add_argument("--seed", type=_seed, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        raw = json.loads(text)
        if isinstance(raw, dict) and "experiment" not in raw:
            text = json.dumps({**raw, "experiment": args.experiment})
        cfg = parse_config(text, seed=args.seed)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config is for {cfg.experiment!r}, not {args.experiment!r}", field="experiment"
            )
    except json.JSONDecodeError as exc:
        print(f"config error: <root>: invalid JSON: {exc.msg}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularInformationError, NumericalDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = args.out or cfg.output
    try:
        if out:
            emit_table(table, out)
        else:
            sys.stdout.write(table_to_csv(table))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
