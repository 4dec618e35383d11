"""Command line front end: one figure per invocation.

Exit status 0 on success, 2 for a bad command line or unusable input
values, 1 for IO and file-format failures.
"""

import argparse
import sys

from .errors import FormatError, InputError, PlotError, UsageError
from .figures import FAMILIES, SMOOTH_DEFAULT, FigureSpec, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tmplot",
        description="Render one metric family from tmlab CSV files.")
    parser.add_argument("--family", required=True,
                        choices=sorted(FAMILIES),
                        help="which figure to draw")
    parser.add_argument("--inputs", required=True, nargs="+",
                        metavar="CSV", help="input files, one per seed")
    parser.add_argument("--out", required=True,
                        help="output image path (extension picks the "
                             "format)")
    parser.add_argument("--smooth", type=int, default=None, metavar="N",
                        help="trailing-mean window for curve families "
                             f"(default {SMOOTH_DEFAULT})")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        spec = FigureSpec(family=args.family, inputs=tuple(args.inputs),
                          out=args.out, smooth=args.smooth)
        out, points = render(spec)
    except (UsageError, InputError) as err:
        print(f"tmplot: {err}", file=sys.stderr)
        return 2
    except (FormatError, PlotError, OSError) as err:
        print(f"tmplot: {err}", file=sys.stderr)
        return 1
    print(out)
    print(points)
    return 0


if __name__ == "__main__":
    sys.exit(main())
