import numpy as np

from semtx.metrics import BinaryMask
from semtx.tensors import load_pgm
from semtx.toy import box_blur, generate_toy_corpus, generate_toy_scene, toy_relevance


def test_indicator_mask_without_blur():
    mask = np.zeros((8, 16), dtype=np.uint8)
    mask[:, 8:] = 255
    rel = toy_relevance(mask, 0)
    assert rel.normalized
    assert np.all(rel.values[:, 8:] == 1.0) and np.all(rel.values[:, :8] == 0.0)


def test_single_pixel_blur_plateau():
    mask = np.zeros((7, 7), dtype=np.uint8)
    mask[3, 3] = 255
    blurred = box_blur((mask >= 128).astype(np.float32), 1)
    np.testing.assert_allclose(blurred[2:5, 2:5], np.full((3, 3), 1 / 9), atol=1e-7)
    assert blurred[0, 0] == 0.0


def test_blur_zero_padding_at_edges():
    ones = np.ones((4, 4), dtype=np.float32)
    blurred = box_blur(ones, 1)
    assert blurred[1, 1] == 1.0  # full interior window
    np.testing.assert_allclose(blurred[0, 0], 4 / 9, atol=1e-7)  # corner loses 5 cells


def test_all_zero_mask_degenerates_to_half():
    rel = toy_relevance(np.zeros((4, 4), dtype=np.uint8), 0)
    assert np.all(rel.values == 0.5)


def test_toy_scene_contract():
    rng = np.random.default_rng(0)
    image, mask = generate_toy_scene(rng, 64, 96)
    assert (image.height, image.width) == (64, 96)
    cov = BinaryMask.from_gray(mask).coverage()
    assert 0.02 < cov < 0.4


def test_corpus_determinism_and_coverage(tmp_path):
    a = generate_toy_corpus(tmp_path / "a", count=3, seed=7)
    b = generate_toy_corpus(tmp_path / "b", count=3, seed=7)
    for (ia, ma), (ib, mb) in zip(a, b):
        assert ia.read_bytes() == ib.read_bytes()
        assert ma.read_bytes() == mb.read_bytes()
        assert BinaryMask.from_gray(load_pgm(ma)).coverage() < 0.4
