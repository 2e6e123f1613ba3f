"""Archive-driven composition: reserved tensor names to a relevance map.

Archives produced by an exporter carry some or all of the reserved entries
below. The minimum for scoring is a pixel-embedding grid (or precomputed
proposal logits) plus either a conditioned text embedding or a raw one with
cross-attention weights; pooled proposal features are recomputed when absent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fusion
from .fusion import (
    CrossAttentionLayerWeights,
    MaskEmbeddings,
    MaskLogits,
    PixelEmbeddings,
    PooledMaskFeatures,
    RelevanceMap,
    TextEmbedding,
)
from .tensors import TensorArchive

# Reserved archive entry names.
E_PIXEL_S4 = "e_pixel_s4"
F3_S32 = "f3_s32"
E_MASK = "e_mask"
MASK_LOGITS_S4 = "mask_logits_s4"
V_POOLED = "v_pooled"
T_RAW = "t_raw"
T_HAT = "t_hat"
S_INF = "s_inf"
S_INF_REF = "s_inf_ref"
CLIP_IMG = "clip_img_emb"
CLIP_TXT = "clip_txt_emb"
CLIP_IMG_RECON = "clip_img_emb_recon"
GT_MASK = "gt_mask"
CDT_HEADS = "cdt_heads"
CDT_NORM = "cdt_norm"


def load_cdt_weights(
    archive: TensorArchive,
) -> Optional[tuple[CrossAttentionLayerWeights, CrossAttentionLayerWeights]]:
    """Read the two cross-attention layers, or None when not exported."""
    if "cdt_w0_q_w" not in archive:
        return None
    heads = int(archive[CDT_HEADS].reshape(-1)[0]) if CDT_HEADS in archive else 1
    use_norm = bool(archive[CDT_NORM].reshape(-1)[0] != 0) if CDT_NORM in archive else False
    layers = []
    for j in (0, 1):
        kw = {}
        for proj in ("q", "k", "v", "o"):
            kw[f"w{proj}"] = archive[f"cdt_w{j}_{proj}_w"]
            kw[f"b{proj}"] = archive[f"cdt_w{j}_{proj}_b"]
        layers.append(
            CrossAttentionLayerWeights(
                heads=heads,
                use_norm=use_norm,
                norm_scale=archive.get(f"cdt_w{j}_norm_scale"),
                norm_offset=archive.get(f"cdt_w{j}_norm_offset"),
                **kw,
            )
        )
    return layers[0], layers[1]


def mask_logits_from_archive(archive: TensorArchive) -> MaskLogits:
    logits = archive.get(MASK_LOGITS_S4)
    if logits is not None:
        return MaskLogits(logits)
    pix = archive.get(E_PIXEL_S4)
    masks = archive.get(E_MASK)
    if pix is None or masks is None:
        raise ValueError(
            f"archive needs {MASK_LOGITS_S4!r} or both {E_PIXEL_S4!r} and {E_MASK!r}"
        )
    return fusion.compute_mask_logits(PixelEmbeddings(pix), MaskEmbeddings(masks))


def conditioned_text_from_archive(archive: TensorArchive) -> TextEmbedding:
    t_hat = archive.get(T_HAT)
    if t_hat is not None:
        return TextEmbedding(t_hat.reshape(-1), conditioned=True)
    t_raw = archive.get(T_RAW)
    weights = load_cdt_weights(archive)
    f3 = archive.get(F3_S32)
    if t_raw is None or weights is None or f3 is None:
        raise ValueError(
            f"archive needs {T_HAT!r}, or {T_RAW!r} plus cdt_w* weights and {F3_S32!r}"
        )
    flat = f3.reshape(f3.shape[0], -1)
    return fusion.cdt_refine(TextEmbedding(t_raw.reshape(-1)), flat, weights)


def pooled_features_from_archive(
    archive: TensorArchive, logits: MaskLogits
) -> PooledMaskFeatures:
    pooled = archive.get(V_POOLED)
    if pooled is not None:
        return PooledMaskFeatures(pooled)
    f3 = archive.get(F3_S32)
    if f3 is None:
        raise ValueError(f"archive needs {V_POOLED!r} or {F3_S32!r}")
    coarse = fusion.bilinear_resize(logits.logits, f3.shape[1], f3.shape[2])
    return fusion.mask_pool(PixelEmbeddings(f3), MaskLogits(coarse))


@dataclass(frozen=True)
class ScoreResult:
    map: RelevanceMap  # normalized
    raw: RelevanceMap


def relevance_from_archive(
    archive: TensorArchive,
    out_h: Optional[int] = None,
    out_w: Optional[int] = None,
    recompute: bool = False,
) -> ScoreResult:
    """Run the fusion path over archive tensors and normalize the result.

    Output resolution defaults to the reference map, then the ground-truth
    mask, then 4x the logits grid. With recompute=True, precomputed pooled
    features and the conditioned text embedding are ignored (everything is
    rebuilt from the raw inputs).
    """
    logits = mask_logits_from_archive(archive)
    if out_h is None or out_w is None:
        for name in (S_INF_REF, GT_MASK):
            ref = archive.get(name)
            if ref is not None:
                out_h, out_w = ref.shape
                break
        else:
            out_h, out_w = 4 * logits.logits.shape[1], 4 * logits.logits.shape[2]

    if recompute:
        trimmed = TensorArchive(
            [t for t in archive.entries if t.name not in (T_HAT, V_POOLED)]
        )
        text = conditioned_text_from_archive(trimmed)
        pooled = pooled_features_from_archive(trimmed, logits)
    else:
        text = conditioned_text_from_archive(archive)
        pooled = pooled_features_from_archive(archive, logits)

    masks_up = fusion.upsample_sigmoid_masks(logits, out_h, out_w)
    raw = fusion.relevance_map(text, pooled, masks_up)
    return ScoreResult(map=fusion.normalize_relevance(raw), raw=raw)


def recon_embedding_cosine(archive: TensorArchive) -> Optional[float]:
    """Cosine between the reconstruction-side image embedding and the query."""
    from .metrics import embedding_similarity

    txt = archive.get(CLIP_TXT)
    img = archive.get(CLIP_IMG_RECON)
    if img is None:
        img = archive.get(CLIP_IMG)
    if txt is None or img is None:
        return None
    return embedding_similarity(img, txt)
