"""Command-line figure renderer for powerobs CSV logs.

    powerobs-plots render --csv <path> [--csv <path> ...]
        --kind voltage_error|speed_error --machine <i> --out <path>
        [--event-time <s>] [--format png|svg]

Exit status 0 on success; errors print one ``error: <Kind>: <reason>``
line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

from .render import FORMATS, KINDS, FigureSpec, PlotsError, render


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="powerobs-plots",
        description="Render figures from powerobs trajectory CSV logs.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from CSV log(s)")
    p.add_argument("--csv", action="append", required=True,
                   help="input CSV (repeat to overlay several logs)")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--machine", type=int, required=True,
                   help="1-based machine index")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--event-time", type=float, dest="event_time",
                   help="draw a vertical marker at this time if in range")
    p.add_argument("--format", choices=FORMATS, dest="fmt",
                   help="image format (default: from the output suffix)")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(csv_paths=tuple(args.csv), kind=args.kind,
                          machine=args.machine, out_path=args.out,
                          event_time=args.event_time, fmt=args.fmt)
        render(spec)
    except PlotsError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: IOError: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
