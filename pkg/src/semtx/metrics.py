"""Evaluation measures: region-restricted MSE, relevance-map L1, cosine, PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fusion import RelevanceMap
from .tensors import RasterImage


@dataclass(frozen=True)
class BinaryMask:
    """Ground-truth query region, (h, w) of {0, 1}."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or g.dtype != np.uint8:
            raise ValueError(f"mask must be (h, w) uint8, got {g.dtype}{g.shape}")
        if not np.isin(g, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")

    @classmethod
    def from_gray(cls, values: np.ndarray, threshold: int = 128) -> "BinaryMask":
        return cls((np.asarray(values) >= threshold).astype(np.uint8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def coverage(self) -> float:
        return float(self.grid.mean(dtype=np.float64))


def masked_mse(original: RasterImage, reconstructed: RasterImage, mask: BinaryMask) -> float:
    """Mean squared uint8 difference over masked pixels, all three channels."""
    if original.pixels.shape != reconstructed.pixels.shape:
        raise ValueError("image dims differ")
    if mask.shape != original.pixels.shape[:2]:
        raise ValueError("mask dims differ from images")
    sel = mask.grid.astype(bool)
    if not sel.any():
        raise ValueError("mask selects no pixels")
    a = original.pixels[sel].astype(np.float64)
    b = reconstructed.pixels[sel].astype(np.float64)
    return float(((a - b) ** 2).mean())


def relevance_l1(a: RelevanceMap, b: RelevanceMap) -> float:
    """Mean absolute per-pixel difference of two comparable relevance maps."""
    if a.shape != b.shape:
        raise ValueError("map dims differ")
    if a.normalized != b.normalized:
        raise ValueError("cannot compare a normalized map with a raw one")
    return float(np.abs(a.values.astype(np.float64) - b.values.astype(np.float64)).mean())


def embedding_similarity(img_emb: np.ndarray, txt_emb: np.ndarray) -> float:
    """Cosine of two embedding vectors."""
    u = np.asarray(img_emb, dtype=np.float64).reshape(-1)
    v = np.asarray(txt_emb, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"embedding lengths differ: {u.shape[0]} vs {v.shape[0]}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("zero-norm embedding")
    return float(u @ v / (nu * nv))


def psnr(original: RasterImage, reconstructed: RasterImage) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    if original.pixels.shape != reconstructed.pixels.shape:
        raise ValueError("image dims differ")
    diff = original.pixels.astype(np.float64) - reconstructed.pixels.astype(np.float64)
    mse = (diff * diff).mean()
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 / mse)
