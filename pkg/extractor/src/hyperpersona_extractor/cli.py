"""Command-line entry point: segments JSONL -> bundle directory."""

from __future__ import annotations

import argparse
import logging
import sys

from .extractor import EmbedConfig, UnitEmbedder, extract_corpus
from .segments import read_segments


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperpersona-extract",
        description="Layer-averaged transformer embeddings as bundle files",
    )
    parser.add_argument("--segments", required=True, help="segments JSONL from the segmenter")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--layers", default="9:12", help="1-based inclusive range, e.g. 9:12")
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    lo, hi = EmbedConfig.parse_layers(args.layers)
    config = EmbedConfig(model_id=args.model, layer_lo=lo, layer_hi=hi,
                         max_tokens=args.max_tokens)
    try:
        documents = read_segments(args.segments)
        embedder = UnitEmbedder(config)
        manifest = extract_corpus(documents, embedder, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(documents)} bundles (dim={embedder.dim}) -> {args.out}")
    print(f"manifest -> {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
