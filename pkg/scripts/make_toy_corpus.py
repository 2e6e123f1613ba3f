#!/usr/bin/env python3
"""Generate the synthetic toy corpus (images + ground-truth masks)."""

import argparse
from pathlib import Path

from semtx.toy import generate_toy_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--height", type=int, default=64)
    ap.add_argument("--width", type=int, default=96)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    pairs = generate_toy_corpus(args.out_dir, args.count, args.height, args.width, args.seed)
    for img, mask in pairs:
        print(img, mask)


if __name__ == "__main__":
    main()
