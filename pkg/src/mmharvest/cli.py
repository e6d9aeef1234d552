"""Command line: ``mmharvest run <scenario>`` and ``mmharvest list``."""
from __future__ import annotations

import argparse
import logging
import sys

from .analysis import CoverageRangeError
from .config import ENGINES, ConfigError, bundled_scenarios, load_config, read_config
from .experiments import run_experiment, to_csv
from .numerics import QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("mmharvest")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmharvest", description="Energy-harvesting coverage in mmWave networks.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario file or bundled scenario")
    run.add_argument("scenario", help="path to a scenario file, or a bundled scenario name")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override one setting (repeatable)")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--engine", choices=ENGINES)
    run.add_argument("--workers", type=int, help="simulation threads (default: HARVEST_THREADS or the CPU count)")
    run.add_argument("--out", help="write CSV here instead of stdout")
    run.add_argument("--no-timing", action="store_true", help="omit the wall-time column")
    run.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _describe(text: str) -> str:
    raw = read_config(text)
    parts = [raw.get("run.reproduces"), raw.get("run.description")]
    return " - ".join(p for p in parts if p)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.command == "list":
        for name, text in bundled_scenarios().items():
            print(f"{name:<8} {_describe(text)}")
        return EXIT_OK

    try:
        raw = load_config(args.scenario)
        for item in args.overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            raw = raw.with_setting(key.strip(), value.strip())
        result = run_experiment(raw, seed=args.seed, trials=args.trials, engine=args.engine,
                                workers=args.workers, name=args.scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, CoverageRangeError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO

    text = to_csv(result, timing=not args.no_timing)
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            log.info("wrote %d rows to %s", len(result.rows), args.out)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
