"""``align-bench`` command line.

Exit codes: 0 success, 1 config error (or a failing ``check``), 2 I/O error,
3 at least one failed cell.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .bench import emit_report, parse_config, report_path_for, run_grid
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FAILED_CELL = 0, 1, 2, 3


def _run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output
    start = time.perf_counter()
    records = run_grid(cfg, workers=args.workers)
    try:
        report = emit_report(records, out, report_path_for(out))
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report, end="")
    print(f"\n{len(records)} cells in {time.perf_counter() - start:.1f}s -> {out}")
    return EXIT_FAILED_CELL if any(r.status != "ok" for r in records) else EXIT_OK


def _check(args) -> int:
    from .selfcheck import run_checks
    return EXIT_OK if run_checks() else EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="align-bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="train and evaluate a grid of cells")
    run.add_argument("--config", required=True, help="JSON grid config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", help="results CSV (overrides the config's output)")
    run.set_defaults(func=_run)
    check = sub.add_parser("check", help="run the built-in property and oracle checks")
    check.set_defaults(func=_check)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
