"""Command line front end: ``render --kind K --in CSV --out PNG``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .render import KINDS, PlotSpec, ReportError, render_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a heston-lda CSV artifact as a PNG figure.",
    )
    parser.add_argument(
        "--version", action="version", version=f"heston-lda-reports {__version__}"
    )
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind")
    parser.add_argument("--in", dest="input_csv", required=True, metavar="CSV",
                        help="input CSV file")
    parser.add_argument("--out", dest="output_png", required=True, metavar="PNG",
                        help="output PNG file")
    args = parser.parse_args(argv)

    try:
        written = render_report(
            PlotSpec(input_csv=args.input_csv, kind=args.kind,
                     output_png=args.output_png)
        )
    except ReportError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(written)
    return 0


if __name__ == "__main__":
    sys.exit(main())
