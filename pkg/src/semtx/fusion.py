"""Query-guided relevance extraction from exported embeddings.

Combines a dense pixel-embedding grid, a set of proposal embeddings, and a
text embedding into a per-pixel relevance map: proposal logits are dot
products of proposal and pixel embeddings; sigmoid proposal masks are pooled
over the coarse visual grid to give one feature vector per proposal; the text
embedding (optionally refined by residual cross-attention against the coarse
visual features) scores each proposal, and the scores are splatted back
through the upsampled sigmoid masks.

All arrays are float32. Reductions use a fixed order (row-major spatial,
ascending proposal index) so identical inputs give identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

POOL_EPS = np.float32(1e-6)
LAYERNORM_EPS = np.float32(1e-5)


def _require_f32(name: str, arr: np.ndarray, ndim: int) -> np.ndarray:
    a = np.asarray(arr)
    if a.dtype != np.float32:
        raise ValueError(f"{name} must be float32, got {a.dtype}")
    if a.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dims, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PixelEmbeddings:
    """Per-location visual features, shape (d, h_f, w_f)."""

    features: np.ndarray

    def __post_init__(self):
        _require_f32("features", self.features, 3)

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class MaskEmbeddings:
    """Proposal query embeddings, shape (N, d)."""

    embeddings: np.ndarray

    def __post_init__(self):
        _require_f32("embeddings", self.embeddings, 2)


@dataclass(frozen=True)
class MaskLogits:
    """Unbounded per-proposal membership scores, shape (N, h_f, w_f)."""

    logits: np.ndarray

    def __post_init__(self):
        _require_f32("logits", self.logits, 3)


@dataclass(frozen=True)
class PooledMaskFeatures:
    """Sigmoid-weighted mean visual feature per proposal, shape (N, d)."""

    features: np.ndarray

    def __post_init__(self):
        _require_f32("features", self.features, 2)


@dataclass(frozen=True)
class TextEmbedding:
    """Query embedding: (d,) single query or (d, C) prompt batch."""

    vector: np.ndarray
    conditioned: bool = False

    def __post_init__(self):
        v = np.asarray(self.vector)
        if v.dtype != np.float32 or v.ndim not in (1, 2):
            raise ValueError(f"text embedding must be float32 (d,) or (d, C), got {v.dtype}{v.shape}")


@dataclass(frozen=True)
class ClassScores:
    """Per-prompt, per-proposal alignment scores, shape (C, N)."""

    scores: np.ndarray

    def __post_init__(self):
        _require_f32("scores", self.scores, 2)


@dataclass(frozen=True)
class RelevanceMap:
    """Per-pixel query-relevance grid, shape (h, w)."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        _require_f32("values", self.values, 2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class CrossAttentionLayerWeights:
    """One residual cross-attention layer.

    Projection matrices act on column vectors: q = wq @ x + bq, with x a
    (d,)-column; heads split the d axis into contiguous blocks. When
    use_norm is set, the query tokens are layer-normalized (eps 1e-5, scale
    norm_scale, offset norm_offset) before projection, and the residual adds
    the un-normalized input.
    """

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray
    bo: np.ndarray
    heads: int = 1
    use_norm: bool = False
    norm_scale: Optional[np.ndarray] = None
    norm_offset: Optional[np.ndarray] = None

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv", "wo"):
            m = _require_f32(name, getattr(self, name), 2)
            if m.shape != (d, d):
                raise ValueError(f"{name} must be ({d}, {d}), got {m.shape}")
            if not np.isfinite(m).all():
                raise ValueError(f"{name} has non-finite entries")
        for name in ("bq", "bk", "bv", "bo"):
            b = _require_f32(name, getattr(self, name), 1)
            if b.shape != (d,):
                raise ValueError(f"{name} must be ({d},), got {b.shape}")
        if self.heads <= 0:
            raise ValueError("head count must be positive")
        if d % self.heads:
            raise ValueError(f"dim {d} not divisible by {self.heads} heads")
        if self.use_norm:
            _require_f32("norm_scale", self.norm_scale, 1)
            _require_f32("norm_offset", self.norm_offset, 1)

    @property
    def dim(self) -> int:
        return self.wq.shape[0]


def compute_mask_logits(pix: PixelEmbeddings, masks: MaskEmbeddings) -> MaskLogits:
    """logits[i, y, x] = <masks[i], pix[:, y, x]>."""
    if masks.embeddings.shape[1] != pix.dim:
        raise ValueError(
            f"embedding dims differ: proposals {masks.embeddings.shape[1]}, pixels {pix.dim}"
        )
    logits = np.einsum("nd,dyx->nyx", masks.embeddings, pix.features, dtype=np.float32)
    return MaskLogits(logits.astype(np.float32, copy=False))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, float64 internally, float32 out."""
    return (1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))).astype(np.float32)


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along one axis, float32."""
    shifted = scores - np.max(scores, axis=axis, keepdims=True)
    e = np.exp(shifted, dtype=np.float32)
    return e / np.sum(e, axis=axis, keepdims=True)


def bilinear_resize(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resample of (..., h, w) grids.

    Uses the lerp form a + t*(b-a), which maps constant fields to themselves
    exactly.
    """
    src_h, src_w = values.shape[-2:]
    if out_h <= 0 or out_w <= 0:
        raise ValueError("target dims must be positive")

    def coords(n_out: int, n_src: int):
        if n_out == 1 or n_src == 1:
            pos = np.zeros(n_out, dtype=np.float64)
        else:
            pos = np.arange(n_out, dtype=np.float64) * (n_src - 1) / (n_out - 1)
        lo = np.floor(pos).astype(np.int64)
        lo = np.minimum(lo, n_src - 1)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, (pos - lo).astype(np.float32)

    y0, y1, wy = coords(out_h, src_h)
    x0, x1, wx = coords(out_w, src_w)

    a = values[..., y0[:, None], x0[None, :]]
    b = values[..., y0[:, None], x1[None, :]]
    c = values[..., y1[:, None], x0[None, :]]
    d = values[..., y1[:, None], x1[None, :]]
    top = a + wx[None, :] * (b - a)
    bot = c + wx[None, :] * (d - c)
    return (top + wy[:, None] * (bot - top)).astype(np.float32, copy=False)


def upsample_sigmoid_masks(logits: MaskLogits, out_h: int, out_w: int) -> np.ndarray:
    """Sigmoid-activate proposal logits and upsample to (N, out_h, out_w)."""
    n, src_h, src_w = logits.logits.shape
    if out_h < src_h or out_w < src_w:
        raise ValueError(
            f"target {out_h}x{out_w} smaller than source {src_h}x{src_w}"
        )
    return bilinear_resize(sigmoid(logits.logits), out_h, out_w)


def mask_pool(feat: PixelEmbeddings, logits: MaskLogits) -> PooledMaskFeatures:
    """Sigmoid-weighted spatial mean of feat under each proposal mask."""
    if feat.features.shape[1:] != logits.logits.shape[1:]:
        raise ValueError(
            f"spatial shapes differ: features {feat.features.shape[1:]}, "
            f"logits {logits.logits.shape[1:]}"
        )
    w = sigmoid(logits.logits).reshape(logits.logits.shape[0], -1)  # (N, S)
    f = feat.features.reshape(feat.dim, -1)  # (d, S)
    num = np.einsum("ns,ds->nd", w, f, dtype=np.float32)
    den = w.sum(axis=1, dtype=np.float32) + POOL_EPS
    return PooledMaskFeatures((num / den[:, None]).astype(np.float32, copy=False))


def _layer_norm(cols: np.ndarray, scale: np.ndarray, offset: np.ndarray) -> np.ndarray:
    mean = cols.mean(axis=0, keepdims=True, dtype=np.float32)
    centered = cols - mean
    var = np.mean(centered * centered, axis=0, keepdims=True, dtype=np.float32)
    normed = centered / np.sqrt(var + LAYERNORM_EPS)
    return normed * scale[:, None] + offset[:, None]


def _cross_attention_layer(
    tokens: np.ndarray, memory: np.ndarray, w: CrossAttentionLayerWeights
) -> np.ndarray:
    """tokens, memory are (d, n) and (d, S) column stacks; returns (d, n)."""
    d, n = tokens.shape
    q_in = _layer_norm(tokens, w.norm_scale, w.norm_offset) if w.use_norm else tokens
    q = w.wq @ q_in + w.bq[:, None]
    k = w.wk @ memory + w.bk[:, None]
    v = w.wv @ memory + w.bv[:, None]
    dh = d // w.heads
    qh = q.reshape(w.heads, dh, n)
    kh = k.reshape(w.heads, dh, -1)
    vh = v.reshape(w.heads, dh, -1)
    scores = np.einsum("hdn,hds->hns", qh, kh, dtype=np.float32) / np.float32(np.sqrt(dh))
    attn = softmax(scores, axis=-1)
    ctx = np.einsum("hns,hds->hdn", attn, vh, dtype=np.float32).reshape(d, n)
    out = w.wo @ ctx + w.bo[:, None]
    return tokens + out


def cdt_refine(
    text: TextEmbedding,
    visual_flat: np.ndarray,
    weights: tuple[CrossAttentionLayerWeights, CrossAttentionLayerWeights],
) -> TextEmbedding:
    """Refine text tokens by two residual cross-attention layers over visual columns.

    visual_flat is the coarsest feature grid flattened row-major to (d, S).
    """
    if text.conditioned:
        raise ValueError("text embedding is already conditioned")
    vf = _require_f32("visual_flat", visual_flat, 2)
    single = text.vector.ndim == 1
    tokens = text.vector[:, None] if single else text.vector
    d = tokens.shape[0]
    if vf.shape[0] != d:
        raise ValueError(f"visual dim {vf.shape[0]} != text dim {d}")
    for w in weights:
        if w.dim != d:
            raise ValueError(f"layer dim {w.dim} != text dim {d}")
        tokens = _cross_attention_layer(tokens, vf, w)
    tokens = tokens.astype(np.float32, copy=False)
    return TextEmbedding(tokens[:, 0] if single else tokens, conditioned=True)


def class_scores(pooled: PooledMaskFeatures, text: TextEmbedding) -> ClassScores:
    """scores[c, i] = <pooled[i], text[:, c]> for a conditioned prompt batch."""
    if not text.conditioned:
        raise ValueError("text embedding must be conditioned")
    t = text.vector
    if t.ndim != 2:
        raise ValueError("class_scores needs a (d, C) prompt batch")
    if pooled.features.shape[1] != t.shape[0]:
        raise ValueError(
            f"dims differ: pooled {pooled.features.shape[1]}, text {t.shape[0]}"
        )
    scores = (pooled.features @ t).T
    return ClassScores(scores.astype(np.float32, copy=False))


def dense_semantic_map(scores: ClassScores, masks_up: np.ndarray) -> np.ndarray:
    """map[c, y, x] = sum_i scores[c, i] * masks_up[i, y, x]."""
    m = _require_f32("masks_up", masks_up, 3)
    if scores.scores.shape[1] != m.shape[0]:
        raise ValueError(
            f"proposal counts differ: scores {scores.scores.shape[1]}, masks {m.shape[0]}"
        )
    out = np.einsum("cn,nyx->cyx", scores.scores, m, dtype=np.float32)
    return out.astype(np.float32, copy=False)


def relevance_map(
    text: TextEmbedding, pooled: PooledMaskFeatures, masks_up: np.ndarray
) -> RelevanceMap:
    """Single-query dense map: sum_i <text, pooled[i]> * masks_up[i]."""
    if not text.conditioned:
        raise ValueError("text embedding must be conditioned")
    if text.vector.ndim != 1:
        raise ValueError("relevance_map needs a single (d,) query")
    batch = TextEmbedding(text.vector[:, None], conditioned=True)
    dense = dense_semantic_map(class_scores(pooled, batch), masks_up)
    return RelevanceMap(dense[0], normalized=False)


def normalize_relevance(raw: RelevanceMap) -> RelevanceMap:
    """Min-max normalize to [0, 1]; a constant map becomes constant 0.5."""
    if raw.normalized:
        raise ValueError("map is already normalized")
    lo = np.float32(raw.values.min())
    hi = np.float32(raw.values.max())
    if hi == lo:
        values = np.full_like(raw.values, 0.5)
    else:
        values = (raw.values - lo) / (hi - lo)
    return RelevanceMap(values.astype(np.float32, copy=False), normalized=True)
