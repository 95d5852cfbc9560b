"""Command line for figure rendering: gaptron-plot --kind <kind> --in <file> --out <img>."""

from __future__ import annotations

import argparse
import sys

from .render import PLOT_KINDS, PlotJob, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaptron-plot",
        description="Render harness CSV/summary outputs into figures",
    )
    parser.add_argument("--kind", choices=PLOT_KINDS, required=True)
    parser.add_argument(
        "--in", dest="inputs", action="append", required=True,
        help="input file; repeat for multiple summaries (regret_vs_bound)",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = PlotJob(
        kind=args.kind, inputs=tuple(args.inputs), output=args.out,
        title=args.title,
    )
    try:
        summary = render(job)
    except (SchemaError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    sys.stdout.write(
        f"wrote {args.out} ({summary.kind}, {summary.series_count} series)\n"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
