"""Command-line entry point: ``mblvqe run`` and ``mblvqe plot``.

Exit codes: 0 success, 2 config/schema violation, 3 resource cap exceeded.
The dense-diagonalization qubit cap honors the MBLVQE_DENSE_CAP environment
variable.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .state import ResourceLimitError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mblvqe",
        description="Batch experiments for Floquet-initialized variational circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a JSON experiment config")
    runp.add_argument("config", help="experiment config (JSON)")
    runp.add_argument("--out", default=None, help="output directory (default: config's out_dir or '.')")
    runp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    runp.add_argument("--resume", action="store_true",
                      help="skip samples whose seeds already appear in the output CSV")
    runp.add_argument("--quiet", action="store_true")

    plotp = sub.add_parser("plot", help="render an experiment CSV to SVG")
    plotp.add_argument("csv", help="input CSV")
    plotp.add_argument("--kind", choices=["sweep", "trajectory"], required=True)
    plotp.add_argument("--out", required=True, help="output SVG path")
    plotp.add_argument("--log-y", action="store_true")
    plotp.add_argument("--no-references", action="store_true",
                       help="omit Haar/Page/Welch reference lines")
    return parser


def _cmd_run(args) -> int:
    from .experiments import run_experiment

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.get("out_dir", ".")

    def progress(i):
        if not args.quiet and i % 50 == 0:
            print(f"  ... {i} results", file=sys.stderr)

    try:
        report = run_experiment(cfg, out_dir, workers=args.workers,
                                resume=args.resume, progress=progress)
    except ResourceLimitError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"wrote {report.rows_written} rows to {Path(out_dir) / (cfg.kind + '.csv')} "
              f"in {report.wall_seconds:.1f}s")
        for key, val in sorted(report.summary.items()):
            if not isinstance(val, (dict, list)):
                print(f"  {key} = {val}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import PlotSchemaError, plot_csv

    try:
        out = plot_csv(args.csv, args.kind, args.out, log_y=args.log_y,
                       references=not args.no_references)
    except PlotSchemaError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
