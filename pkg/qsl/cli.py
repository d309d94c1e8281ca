import argparse
import logging
import sys
from typing import Optional

import pydantic

from . import __version__
from .errors import NumericalError, QslError
from .experiments import EXPERIMENTS
from .models import PRESETS
from .runner import ConfigError, Runner, load_config, validate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='qsl', description="Quantum speed-limit experiments.")
    parser.add_argument('--version', action='version', version=f"qsl {__version__}")
    commands = parser.add_subparsers(dest='command', metavar='<experiment>')
    for tag, cls in EXPERIMENTS.items():
        summary, _ = cls.describe()
        sub = commands.add_parser(tag, help=summary, description=summary)
        sub.add_argument('--config', required=True, help="Path to the JSON experiment config.")
        sub.add_argument('--out', help="Output directory, overriding `output_path`.")
        sub.add_argument('--seed', type=int, help="Random seed, overriding the config.")
        sub.add_argument('--steps', type=int, help="Number of time steps, overriding the config.")
        sub.add_argument('--verbose', action='store_true', help="Log at DEBUG level.")
    check = commands.add_parser('validate', help="Report every problem of a config without running it.")
    check.add_argument('--config', required=True)
    commands.add_parser('list', help="List experiments, their parameters and the named presets.")
    return parser


def list_experiments() -> str:
    lines = ["experiments:"]
    for tag, cls in EXPERIMENTS.items():
        summary, params = cls.describe()
        lines.append(f"  {tag}: {summary}")
        for name, help_text in params.items():
            lines.append(f"      {name}: {help_text}")
    lines.append("presets:")
    for name, values in PRESETS.items():
        lines.append(f"  {name}: " + ", ".join(f"{k}={v:g}" for k, v in values.items()))
    return "\n".join(lines)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print(f"qsl: error: missing experiment; valid tags: {', '.join(EXPERIMENTS)}", file=sys.stderr)
        return EXIT_INVALID

    logging.basicConfig(level=logging.DEBUG if getattr(args, 'verbose', False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == 'list':
        print(list_experiments())
        return EXIT_OK
    try:
        if args.command == 'validate':
            problems = validate(args.config)
            for line in problems:
                print(line)
            return EXIT_INVALID if problems else EXIT_OK

        config = load_config(args.config, seed=args.seed, steps=args.steps, output_path=args.out)
        if config.experiment != args.command:
            print(f"config is for {config.experiment!r}, not {args.command!r}", file=sys.stderr)
            return EXIT_INVALID
        outcome = Runner(config).run()
        print(outcome.csv_path)
        return EXIT_OK
    except ConfigError as e:
        for line in e.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (QslError, ValueError, pydantic.ValidationError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
