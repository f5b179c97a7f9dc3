"""Command line entry point: report --in DIR --out DIR [--kinds ...]."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, ReportSpec, render


def parse_kinds(text: str) -> tuple[str, ...]:
    if text == "all":
        return FIGURE_KINDS
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render figures from simulation run directories.",
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="run directory or tree of runs")
    parser.add_argument("--out", dest="out_dir", required=True, help="directory for figure files")
    parser.add_argument(
        "--kinds",
        default="all",
        help=f"'all' or comma-separated subset of {', '.join(FIGURE_KINDS)}",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ReportSpec(in_dir=args.in_dir, out_dir=args.out_dir, kinds=parse_kinds(args.kinds))
        paths = render(spec)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
