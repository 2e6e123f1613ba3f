"""Model-free relevance scoring and synthetic corpus generation.

The toy scorer turns a ground-truth query mask into a relevance map (optional
box blur softens the edges), letting the whole transmit/evaluate path run
without any exported embeddings. The corpus generator produces small textured
scenes with known masks for end-to-end tests and demos.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fusion import RelevanceMap, bilinear_resize, normalize_relevance
from .tensors import RasterImage, save_pgm, save_ppm


def box_blur(values: np.ndarray, radius: int) -> np.ndarray:
    """Mean filter with a (2r+1)^2 window, zero padding, constant divisor."""
    if radius < 0:
        raise ValueError("blur radius must be >= 0")
    vals = np.asarray(values, dtype=np.float64)
    if radius == 0:
        return vals.astype(np.float32)
    k = 2 * radius + 1
    h, w = vals.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius))
    padded[radius : radius + h, radius : radius + w] = vals
    ii = np.zeros((h + 2 * radius + 1, w + 2 * radius + 1))
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    sums = ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]
    return (sums / (k * k)).astype(np.float32)


def toy_relevance(mask_gray: np.ndarray, blur_radius: int = 0) -> RelevanceMap:
    """Normalized relevance map from a grayscale mask (>=128 counts as inside)."""
    inside = (np.asarray(mask_gray) >= 128).astype(np.float32)
    raw = box_blur(inside, blur_radius)
    return normalize_relevance(RelevanceMap(raw, normalized=False))


def _smooth_field(rng: np.random.Generator, h: int, w: int, cells: int = 4) -> np.ndarray:
    low = rng.random((1, cells, cells)).astype(np.float32)
    return bilinear_resize(low, h, w)[0]


def generate_toy_scene(
    rng: np.random.Generator, height: int, width: int
) -> tuple[RasterImage, np.ndarray]:
    """One synthetic scene: smooth background, textured elliptical object.

    Returns the image and a {0, 255} mask covering under 40% of the pixels.
    """
    base_color = rng.integers(40, 216, 3)
    img = np.zeros((height, width, 3), dtype=np.float64)
    for c in range(3):
        img[:, :, c] = base_color[c] + 60.0 * (_smooth_field(rng, height, width) - 0.5)

    # elliptical object, axes sized for ~6-30% coverage
    cy = rng.uniform(0.3, 0.7) * height
    cx = rng.uniform(0.3, 0.7) * width
    ay = rng.uniform(0.14, 0.3) * height
    ax = rng.uniform(0.14, 0.3) * width
    yy, xx = np.mgrid[0:height, 0:width]
    mask = (((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2 <= 1.0).astype(np.uint8)

    object_color = rng.integers(0, 256, 3)
    texture = rng.normal(0.0, 45.0, (height, width, 3))
    sel = mask.astype(bool)
    for c in range(3):
        layer = img[:, :, c]
        layer[sel] = object_color[c] + texture[:, :, c][sel]
    pixels = np.clip(img, 0, 255).astype(np.uint8)
    return RasterImage(pixels), mask * np.uint8(255)


def generate_toy_corpus(
    out_dir: str | Path,
    count: int = 10,
    height: int = 64,
    width: int = 96,
    seed: int = 7,
) -> list[tuple[Path, Path]]:
    """Write `count` (image.ppm, image.mask.pgm) pairs; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(count):
        rng = np.random.default_rng(seed * 1000 + i)
        image, mask = generate_toy_scene(rng, height, width)
        img_path = out / f"scene{i:02d}.ppm"
        mask_path = out / f"scene{i:02d}.mask.pgm"
        save_ppm(image, img_path)
        save_pgm(mask, mask_path)
        pairs.append((img_path, mask_path))
    return pairs
