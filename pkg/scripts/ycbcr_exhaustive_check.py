#!/usr/bin/env python3
"""Sweep all 2^24 RGB triples through the fixed-point color transform.

Slow-path verification behind the lattice test in tests/test_codec.py;
reports the worst per-channel roundtrip error (expected: 2).
"""

import numpy as np

from semtx.codec import rgb_to_ycbcr, ycbcr_to_rgb


def main() -> None:
    g, b = np.meshgrid(np.arange(256, dtype=np.int32), np.arange(256, dtype=np.int32), indexing="ij")
    worst, arg = 0, None
    for r in range(256):
        rr = np.full_like(g, r)
        r2, g2, b2 = ycbcr_to_rgb(*rgb_to_ycbcr(rr, g, b))
        err = np.maximum(
            np.abs(r2.astype(int) - r),
            np.maximum(np.abs(g2.astype(int) - g), np.abs(b2.astype(int) - b)),
        )
        m = int(err.max())
        if m > worst:
            worst = m
            i, j = np.unravel_index(err.argmax(), err.shape)
            arg = (r, int(g[i, j]), int(b[i, j]))
    print(f"max per-channel roundtrip error: {worst} at {arg}")
    assert worst <= 3


if __name__ == "__main__":
    main()
