"""distval-plot: render engine result files into figures."""
import argparse
import sys

from .plots import PLOT_KINDS, PlotJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="distval-plot")
    parser.add_argument("--input", required=True, help="explain JSON or fidelity CSV")
    parser.add_argument("--kind", required=True, choices=PLOT_KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        render(PlotJob(args.input, args.kind, args.out))
    except SchemaError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
