from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence

from .config import load_config
from .exceptions import ConfigError, NumericalError, SchemaError, UsageError
from .experiments import run
from .plots import PlotKind, emit_svg
from .version import version as driftlab_version


__all__ = ["main"]


# Exit statuses.
OK = 0
INVALID_INPUT = 2
NUMERICAL_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Run generative drifting experiments and plot their outputs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"driftlab {driftlab_version}"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run an experiment")
    run_parser.add_argument("config", metavar="<config>", help="TOML or JSON file")
    run_parser.add_argument("--out", metavar="DIR", help="output directory")
    run_parser.add_argument("--seed", metavar="N", type=int, help="master seed")

    plot_parser = commands.add_parser("plot", help="render a CSV table as SVG")
    plot_parser.add_argument("csv", metavar="<csv>")
    plot_parser.add_argument(
        "--kind",
        required=True,
        choices=[kind.value for kind in PlotKind],
    )
    plot_parser.add_argument("--out", metavar="FILE", help="output SVG file")
    plot_parser.add_argument(
        "--columns",
        metavar="A,B,...",
        help="comma-separated columns to plot",
    )

    validate_parser = commands.add_parser("validate", help="check a config file")
    validate_parser.add_argument("config", metavar="<config>")
    return parser


def _run(args: argparse.Namespace) -> None:
    config = load_config(args.config).with_overrides(
        seed=args.seed,
        output_dir=args.out,
    )
    manifest = run(config)
    print(manifest)


def _plot(args: argparse.Namespace) -> None:
    columns = args.columns.split(",") if args.columns else None
    path = emit_svg(args.csv, args.kind, args.out, columns=columns)
    print(path)


def _validate(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    print(json.dumps(config.to_json(), indent=2, sort_keys=True))


COMMANDS = {"run": _run, "plot": _plot, "validate": _validate}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        level=logging.DEBUG if args.verbose else logging.INFO,
    )

    try:
        COMMANDS[args.command](args)
    except (ConfigError, SchemaError, UsageError) as exc:
        print(f"driftlab: error: {exc}", file=sys.stderr)
        return INVALID_INPUT
    except NumericalError as exc:
        print(f"driftlab: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_FAILURE
    return OK


if __name__ == "__main__":
    sys.exit(main())
