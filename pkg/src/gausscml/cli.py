"""Command-line front end: one subcommand per experiment."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import Config, parse_overrides
from .exceptions import NumericalError, ValidationError
from .experiments import KINDS, RECORD_NAME, rerun, run_experiment

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("gausscml")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gausscml",
        description="Simulate and analyse a 1-D lattice of diffusively coupled Gauss maps.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; outputs do not depend on this")
    p = sub.add_parser("rerun", help=f"repeat an experiment from its {RECORD_NAME}")
    p.add_argument("record")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("show-config", help="print the effective configuration")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def load_config(path, overrides) -> Config:
    cfg = Config() if path is None else Config.from_file(path)
    return cfg.with_overrides(parse_overrides(overrides))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "show-config":
            sys.stdout.write(load_config(args.config, args.set).to_text())
            return EXIT_OK
        if args.command == "rerun":
            record = rerun(args.record, args.out, args.workers)
        else:
            cfg = load_config(args.config, args.set)
            record = run_experiment(args.command, cfg, args.out, args.workers)
        log.info("%s finished in %.1f s: %s", record.kind, record.wall_time,
                 ", ".join(record.outputs))
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
