"""Command-line figure rendering.

    replaylab-plots plot-curves --spec figure.json
    replaylab-plots plot-heatmap --csv grid.csv --res 50 --out heat.png

The curve spec is JSON: {"series": [{"csv", "label", "color"?}...],
"metric", "out", "x_label"?, "y_label"?, "smooth_window"?, "title"?}.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, plot_curves, plot_heatmap


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replaylab-plots",
                                     description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    curves = sub.add_parser("plot-curves", help="learning curves with bands")
    curves.add_argument("--spec", required=True, help="JSON figure spec")
    heat = sub.add_parser("plot-heatmap", help="state-density heatmap")
    heat.add_argument("--csv", required=True, help="grid CSV (ix,iy,prob)")
    heat.add_argument("--res", type=int, default=50, help="grid resolution")
    heat.add_argument("--out", required=True, help="output image path")
    heat.add_argument("--title", default="")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot-curves":
            _, out = plot_curves(FigureSpec.from_file(args.spec))
        else:
            _, out = plot_heatmap(args.csv, args.res, args.out, args.title)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
