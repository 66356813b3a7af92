"""Command line entry point.

Exit codes follow the design harness: 0 success, 1 bad input or I/O.
"""

from __future__ import annotations

import argparse
import sys

from .plots import render_sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="plot-sweep",
        description="Render a design-harness sweep.csv as a two-panel "
                    "log-log figure (T gamma_e^2 and gamma_e^2 versus T).",
    )
    p.add_argument("csv", help="sweep.csv written by the design harness")
    p.add_argument("out", help="output image path; the extension picks the format")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render_sweep(args.csv, args.out)
    except (ValueError, OSError) as e:
        print(f"plot error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
