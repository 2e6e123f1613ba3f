import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semtx.fusion import RelevanceMap
from semtx.metrics import BinaryMask, embedding_similarity, masked_mse, psnr, relevance_l1
from semtx.tensors import RasterImage


def img(arr):
    return RasterImage(np.asarray(arr, dtype=np.uint8))


def full_mask(h, w):
    return BinaryMask(np.ones((h, w), dtype=np.uint8))


def test_masked_mse_identical_is_zero():
    a = img(np.random.default_rng(0).integers(0, 256, (4, 4, 3)))
    assert masked_mse(a, a, full_mask(4, 4)) == 0.0


def test_masked_mse_extreme_difference():
    a = img(np.zeros((2, 2, 3)))
    b = img(np.full((2, 2, 3), 255))
    assert masked_mse(a, b, full_mask(2, 2)) == 255.0**2 == 65025.0


def test_masked_mse_ignores_outside_mask():
    a = img(np.zeros((2, 2, 3)))
    bad = np.zeros((2, 2, 3), dtype=np.uint8)
    bad[0, 0] = 200
    mask = np.zeros((2, 2), dtype=np.uint8)
    mask[1, 1] = 1
    assert masked_mse(a, img(bad), BinaryMask(mask)) == 0.0


def test_masked_mse_errors():
    a = img(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError, match="no pixels"):
        masked_mse(a, a, BinaryMask(np.zeros((2, 2), dtype=np.uint8)))
    with pytest.raises(ValueError, match="dims"):
        masked_mse(a, img(np.zeros((2, 3, 3))), full_mask(2, 2))


def test_mask_threshold_and_coverage():
    m = BinaryMask.from_gray(np.array([[0, 127], [128, 255]], dtype=np.uint8))
    assert m.grid.tolist() == [[0, 0], [1, 1]]
    assert m.coverage() == 0.5


def rel(vals, normalized=True):
    return RelevanceMap(np.asarray(vals, dtype=np.float32), normalized=normalized)


def test_relevance_l1_basics():
    a = rel([[1.0, 1.0]])
    b = rel([[0.0, 0.0]])
    assert relevance_l1(a, a) == 0.0
    assert relevance_l1(a, b) == 1.0


def test_relevance_l1_mismatches():
    with pytest.raises(ValueError, match="dims"):
        relevance_l1(rel([[0.0]]), rel([[0.0, 0.0]]))
    with pytest.raises(ValueError, match="normalized"):
        relevance_l1(rel([[0.0]]), rel([[0.0]], normalized=False))


@given(
    arrays(np.float32, (3, 4), elements=st.floats(0, 1, width=32)),
    arrays(np.float32, (3, 4), elements=st.floats(0, 1, width=32)),
    arrays(np.float32, (3, 4), elements=st.floats(0, 1, width=32)),
)
@settings(max_examples=60, deadline=None)
def test_relevance_l1_is_a_metric(a, b, c):
    ra, rb, rc = rel(a), rel(b), rel(c)
    assert relevance_l1(ra, rb) >= 0.0
    assert relevance_l1(ra, rb) == relevance_l1(rb, ra)
    assert relevance_l1(ra, rc) <= relevance_l1(ra, rb) + relevance_l1(rb, rc) + 1e-12


def test_cosine_identities():
    v = np.array([0.3, -0.7, 2.0], dtype=np.float32)
    assert embedding_similarity(v, v) == pytest.approx(1.0)
    assert embedding_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
    assert embedding_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(1 / math.sqrt(2))


def test_cosine_scale_invariance_and_range():
    rng = np.random.default_rng(1)
    for _ in range(20):
        u = rng.standard_normal(8)
        v = rng.standard_normal(8)
        c = embedding_similarity(u, v)
        assert -1.0 <= c <= 1.0
        assert embedding_similarity(3.5 * u, 0.2 * v) == pytest.approx(c)


def test_cosine_zero_norm_rejected():
    with pytest.raises(ValueError, match="zero-norm"):
        embedding_similarity([0.0, 0.0], [1.0, 0.0])


def test_psnr_reference_points():
    a = img(np.zeros((2, 2, 3)))
    assert psnr(a, a) == math.inf
    b = img(np.full((2, 2, 3), 255))
    assert psnr(a, b) == pytest.approx(0.0)


def test_psnr_twenty_db():
    # 12 samples, three diffs of 51: MSE = 3 * 51^2 / 12 = 650.25 -> exactly 20 dB
    a = np.zeros((2, 2, 3), dtype=np.uint8)
    b = np.zeros((2, 2, 3), dtype=np.uint8)
    b[0, 0, :] = 51
    assert psnr(img(a), img(b)) == pytest.approx(20.0)
