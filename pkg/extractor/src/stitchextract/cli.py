"""Command-line entry: extract --a IMG --b IMG --out corr.json [--ratio 0.75]"""

from __future__ import annotations

import argparse
import logging
import sys

import cv2

from .extract import ExtractionConfig, extract_and_match
from .visualize import visualize_matches


def _load(path: str):
    img = cv2.imread(path, cv2.IMREAD_COLOR)
    if img is None:
        raise IOError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="extract",
        description="Detect and match SIFT points and LSD line segments; "
                    "emit a stitching correspondence file",
    )
    p.add_argument("--a", required=True, help="target image")
    p.add_argument("--b", required=True, help="reference image")
    p.add_argument("--out", required=True, help="output correspondence JSON")
    p.add_argument("--ratio", type=float, default=0.75)
    p.add_argument("--line-strategy", choices=["guided", "none"], default="guided")
    p.add_argument("--line-tolerance", type=float, default=5.0)
    p.add_argument("--min-line-length", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--visualize", metavar="PNG", default=None,
                   help="also write an annotated side-by-side image")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        image_a = _load(args.a)
        image_b = _load(args.b)
    except IOError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    config = ExtractionConfig(
        ratio=args.ratio,
        line_strategy=args.line_strategy,
        line_tolerance=args.line_tolerance,
        min_line_length=args.min_line_length,
        seed=args.seed,
    )
    points, lines = extract_and_match(image_a, image_b, args.out, config)
    print(f"wrote {points.shape[0]} point and {lines.shape[0]} line matches to {args.out}")
    if args.visualize:
        visualize_matches(args.out, image_a, image_b, args.visualize)
        print(f"wrote visualization to {args.visualize}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
