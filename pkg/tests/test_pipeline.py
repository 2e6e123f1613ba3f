import numpy as np
import pytest
from test_fusion import oracle_attention_layer, random_weights

from semtx import pipeline as pl

from semtx.tensors import Tensor, TensorArchive

def naive_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))

def naive_bilinear(plane, out_h, out_w):
    src_h, src_w = plane.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        y = 0.0 if out_h == 1 or src_h == 1 else i * (src_h - 1) / (out_h - 1)
        y0 = min(int(np.floor(y)), src_h - 1)
        y1 = min(y0 + 1, src_h - 1)
        wy = y - y0
        for j in range(out_w):
            x = 0.0 if out_w == 1 or src_w == 1 else j * (src_w - 1) / (out_w - 1)
            x0 = min(int(np.floor(x)), src_w - 1)
            x1 = min(x0 + 1, src_w - 1)
            wx = x - x0
            top = plane[y0, x0] * (1 - wx) + plane[y0, x1] * wx
            bot = plane[y1, x0] * (1 - wx) + plane[y1, x1] * wx
            out[i, j] = top * (1 - wy) + bot * wy
    return out

def weights_entries(j, w):
    names = {"q": (w.wq, w.bq), "k": (w.wk, w.bk), "v": (w.wv, w.bv), "o": (w.wo, w.bo)}
    entries = []
    for proj, (mat, bias) in names.items():
        entries.append(Tensor(f"cdt_w{j}_{proj}_w", mat))
        entries.append(Tensor(f"cdt_w{j}_{proj}_b", bias))
    if w.use_norm:
        entries.append(Tensor(f"cdt_w{j}_norm_scale", w.norm_scale))
        entries.append(Tensor(f"cdt_w{j}_norm_offset", w.norm_offset))
    return entries

def build_reference_archive(seed=0, h=64, w=96, d=8, n=3, heads=2, use_norm=False):
    """Synthetic exporter output with every derived tensor from float64 loops."""
    rng = np.random.default_rng(seed)
    hf, wf = h // 4, w // 4
    h3, w3 = h // 32, w // 32
    e_pixel = (rng.standard_normal((d, hf, wf)) * 0.4).astype(np.float32)
    e_mask = (rng.standard_normal((n, d)) * 0.4).astype(np.float32)
    f3 = (rng.standard_normal((d, h3, w3)) * 0.4).astype(np.float32)
    t_raw = (rng.standard_normal(d) * 0.4).astype(np.float32)
    w0 = random_weights(d, heads, rng, use_norm=use_norm)
    w1 = random_weights(d, heads, rng, use_norm=use_norm)

    logits = np.einsum(
        "nd,dyx->nyx", e_mask.astype(np.float64), e_pixel.astype(np.float64)
    )
    coarse = np.stack([naive_bilinear(logits[i], h3, w3) for i in range(n)])
    sig = naive_sigmoid(coarse)
    v = np.zeros((n, d))
    for i in range(n):
        weights_sum = sig[i].sum()
        v[i] = (sig[i][None] * f3.astype(np.float64)).sum(axis=(1, 2)) / (weights_sum + 1e-6)

    t_hat = oracle_attention_layer(t_raw[:, None].astype(np.float64), f3.reshape(d, -1), w0)
    t_hat = oracle_attention_layer(t_hat, f3.reshape(d, -1), w1)[:, 0]

    masks_up = np.stack([naive_bilinear(naive_sigmoid(logits[i]), h, w) for i in range(n)])
    raw = np.zeros((h, w))
    for i in range(n):
        raw += float(t_hat @ v[i]) * masks_up[i]
    lo, hi = raw.min(), raw.max()
    s_inf_ref = np.full((h, w), 0.5) if hi == lo else (raw - lo) / (hi - lo)

    archive = TensorArchive(
        [
            Tensor(pl.E_PIXEL_S4, e_pixel),
            Tensor(pl.F3_S32, f3),
            Tensor(pl.E_MASK, e_mask),
            Tensor(pl.MASK_LOGITS_S4, logits.astype(np.float32)),
            Tensor(pl.V_POOLED, v.astype(np.float32)),
            Tensor(pl.T_RAW, t_raw),
            Tensor(pl.T_HAT, t_hat.astype(np.float32)),
            Tensor(pl.S_INF_REF, s_inf_ref.astype(np.float32)),
            Tensor(pl.CDT_HEADS, np.array([heads], dtype=np.float32)),
            Tensor(pl.CDT_NORM, np.array([1.0 if use_norm else 0.0], dtype=np.float32)),
            *weights_entries(0, w0),
            *weights_entries(1, w1),
        ]
    )
    return archive, {"s_inf_ref": s_inf_ref, "t_hat": t_hat, "v": v}

def rel_err(got, ref):
    return np.abs(np.asarray(got, dtype=np.float64) - ref).max() / np.abs(ref).max()

def test_relevance_matches_reference_precomputed_path():
    archive, refs = build_reference_archive(seed=1)
    result = pl.relevance_from_archive(archive)
    assert result.map.normalized and result.map.shape == (64, 96)
    assert rel_err(result.map.values, refs["s_inf_ref"]) < 1e-4

@pytest.mark.parametrize("use_norm", [False, True])
def test_relevance_matches_reference_recomputed_path(use_norm):
    archive, refs = build_reference_archive(seed=2 + use_norm, use_norm=use_norm)
    result = pl.relevance_from_archive(archive, recompute=True)
    assert rel_err(result.map.values, refs["s_inf_ref"]) < 1e-3

def test_cdt_weights_roundtrip_through_archive():
    archive, refs = build_reference_archive(seed=3, use_norm=True)
    trimmed = TensorArchive([t for t in archive.entries if t.name != pl.T_HAT])
    text = pl.conditioned_text_from_archive(trimmed)
    assert text.conditioned
    assert rel_err(text.vector, refs["t_hat"]) < 1e-3

def test_pooled_features_recompute_matches_reference():
    archive, refs = build_reference_archive(seed=4)
    trimmed = TensorArchive([t for t in archive.entries if t.name != pl.V_POOLED])
    logits = pl.mask_logits_from_archive(trimmed)
    pooled = pl.pooled_features_from_archive(trimmed, logits)
    assert rel_err(pooled.features, refs["v"]) < 1e-3

def test_logits_computed_when_absent():
    archive, _ = build_reference_archive(seed=5)
    trimmed = TensorArchive([t for t in archive.entries if t.name != pl.MASK_LOGITS_S4])
    got = pl.mask_logits_from_archive(trimmed).logits
    np.testing.assert_allclose(got, archive[pl.MASK_LOGITS_S4], atol=1e-4)

def test_missing_inputs_reported():
    with pytest.raises(ValueError, match="mask_logits_s4"):
        pl.mask_logits_from_archive(TensorArchive())
    with pytest.raises(ValueError, match="t_hat"):
        archive, _ = build_reference_archive(seed=6)
        only_logits = TensorArchive([t for t in archive.entries if t.name == pl.MASK_LOGITS_S4])
        pl.relevance_from_archive(only_logits)

def test_output_dims_priority():
    archive, _ = build_reference_archive(seed=7)
    assert pl.relevance_from_archive(archive).map.shape == (64, 96)  # from s_inf_ref
    assert pl.relevance_from_archive(archive, 128, 192).map.shape == (128, 192)
    no_ref = TensorArchive([t for t in archive.entries if t.name != pl.S_INF_REF])
    assert pl.relevance_from_archive(no_ref).map.shape == (64, 96)  # 4x logits grid

def test_recon_embedding_cosine_prefers_recon_entry():
    txt = np.array([1.0, 0.0], dtype=np.float32)
    orig = np.array([1.0, 0.0], dtype=np.float32)
    recon = np.array([0.0, 1.0], dtype=np.float32)
    a = TensorArchive([Tensor(pl.CLIP_TXT, txt), Tensor(pl.CLIP_IMG, orig)])
    assert pl.recon_embedding_cosine(a) == pytest.approx(1.0)
    b = TensorArchive(
        [Tensor(pl.CLIP_TXT, txt), Tensor(pl.CLIP_IMG, orig), Tensor(pl.CLIP_IMG_RECON, recon)]
    )
    assert pl.recon_embedding_cosine(b) == pytest.approx(0.0)
    assert pl.recon_embedding_cosine(TensorArchive()) is None
