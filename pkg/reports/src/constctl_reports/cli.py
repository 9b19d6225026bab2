"""Command line for rendering sweep figures.

Exit codes: 0 clean render, 1 rendered with warnings (panels without
data), 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import sys

from .render import FORMAT_RASTER, FORMAT_VECTOR, ReportSpec, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render error-vs-horizon and error-vs-actuation figures "
                    "from sweep CSVs.",
    )
    parser.add_argument("--exp1", help="horizon-sweep CSV")
    parser.add_argument("--exp2", help="actuation-sweep CSV")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=["svg", "png"], default="svg")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.exp1 is None and args.exp2 is None:
        sys.stderr.write("error: provide --exp1 and/or --exp2\n")
        return 2
    spec = ReportSpec(
        exp1_csv=args.exp1,
        exp2_csv=args.exp2,
        out_dir=args.out,
        figure_format=FORMAT_VECTOR if args.format == "svg" else FORMAT_RASTER,
    )
    try:
        result = render_all(spec)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    for path in result.figures:
        sys.stdout.write(f"{path}\n")
    if result.warnings:
        sys.stderr.write(f"warning: {result.warnings} panel(s) had no data\n")
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
