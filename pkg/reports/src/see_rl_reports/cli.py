"""report: turn run directories into figures and an aggregation table."""

import argparse
import sys

from .figures import learning_curves, normalized_profile
from .records import ReportError, load_runs


def build_parser():
    parser = argparse.ArgumentParser(
        prog="report",
        description="Generate learning-curve figures (and optionally a "
                    "normalized performance profile) from training run "
                    "directories.")
    parser.add_argument("--runs", nargs="+", required=True,
                        help="run directories containing metrics.csv and "
                             "config.json")
    parser.add_argument("--out", required=True,
                        help="output directory for figures and tables")
    parser.add_argument("--profile", action="store_true",
                        help="also emit the normalized profile figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        records = load_runs(args.runs)
        written = learning_curves(records, args.out)
        if args.profile:
            written += list(normalized_profile(records, args.out))
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
