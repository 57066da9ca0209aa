"""Command line entry point: salgraph-extract."""

from __future__ import annotations

import argparse
import logging
import sys

from .extractor import LAYERS, ExtractionSpec, extract_features


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salgraph-extract",
        description="Extract a 512-channel deep feature volume (FVOL) from a frame directory.",
    )
    parser.add_argument("--frames", required=True, help="input frame directory")
    parser.add_argument("--out", required=True, help="output FVOL path")
    parser.add_argument("--layer", default="conv5_3", choices=sorted(LAYERS),
                        help="backbone layer providing the 512-channel map")
    parser.add_argument("--weights", default="default",
                        help="'default' (pretrained), 'none' (seeded random), or checkpoint path")
    parser.add_argument("--batch-size", type=int, default=4)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--seed", type=int, default=0, help="init seed for weights='none'")
    parser.add_argument("--pattern", default="*.png", help="frame filename glob")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    spec = ExtractionSpec(
        layer=args.layer,
        weights=args.weights,
        batch_size=args.batch_size,
        device=args.device,
        seed=args.seed,
    )
    try:
        extract_features(args.frames, spec, args.out, pattern=args.pattern)
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        logging.getLogger("salgraph_extractor").error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
