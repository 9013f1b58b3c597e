"""Command line entry point: convert <input_dir> <dataset_name> <output_dir>."""

import argparse
import sys

from .convert import DATASETS, ConvertError, convert_planetoid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convert",
        description="Convert an upstream Planetoid bundle into a plain-text dataset directory.",
    )
    parser.add_argument("input_dir", help="directory holding the ind.<name>.* files")
    parser.add_argument("dataset_name", choices=DATASETS)
    parser.add_argument("output_dir", help="dataset directory to create")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = convert_planetoid(args.input_dir, args.dataset_name, args.output_dir)
    except (ConvertError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
