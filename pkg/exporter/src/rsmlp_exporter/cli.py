"""Command-line entry point for the exporter."""

from __future__ import annotations

import argparse
import sys

from .encoders import HashEncoder, SubwordMeanPoolEncoder
from .export import export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsmlp-export",
        description="Export per-example token embeddings to an RSME file",
    )
    parser.add_argument("--input", required=True, help="JSONL corpus")
    parser.add_argument("--output", required=True, help="RSME output path")
    parser.add_argument("--mode", choices=("char", "word"), default="char")
    parser.add_argument("--encoder", choices=("hash", "subword"), default="hash")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.encoder == "hash":
        encoder = HashEncoder(dim=args.dim, seed=args.seed)
    else:
        encoder = SubwordMeanPoolEncoder(dim=args.dim, seed=args.seed)
    try:
        summary = export(args.input, args.output, encoder, mode=args.mode)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"{summary.exported} exported, {summary.zeroed} zeroed, "
        f"{summary.failed} failures (dim {summary.dim})",
        file=sys.stderr,
    )
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
