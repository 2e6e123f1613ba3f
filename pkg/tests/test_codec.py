import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semtx.allocation import AllocationPlan, RateTable, uniform_plan
from semtx.codec import (
    EncodedFrame,
    PatchPayload,
    decode_frame,
    decode_patch,
    encode_frame,
    encode_patch,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)
from semtx.errors import FormatError
from semtx.fusion import bilinear_resize
from semtx.tensors import RasterImage

TABLE = RateTable()
patches = arrays(np.uint8, (8, 8, 3), elements=st.integers(0, 255))


# ------------------------------------------------------------ patch budgets


@given(patches, st.integers(0, 4))
@settings(max_examples=150, deadline=None)
def test_payload_length_is_exact(patch, level):
    assert len(encode_patch(patch, level).data) == TABLE.rates[level]


def test_level0_empty_payload():
    assert encode_patch(np.zeros((8, 8, 3), np.uint8), 0).data == b""


def test_level1_constant_gray_payload():
    patch = np.full((8, 8, 3), 77, dtype=np.uint8)
    assert encode_patch(patch, 1).data == bytes([77] * 12)


def test_level4_payload_is_raw_patch():
    rng = np.random.default_rng(0)
    patch = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    assert encode_patch(patch, 4).data == patch.tobytes()


def test_invalid_level_and_dims():
    with pytest.raises(ValueError, match="level"):
        encode_patch(np.zeros((8, 8, 3), np.uint8), 5)
    with pytest.raises(ValueError, match="patch"):
        encode_patch(np.zeros((4, 4, 3), np.uint8), 1)


# --------------------------------------------------------------- roundtrips


@given(patches)
@settings(max_examples=100, deadline=None)
def test_level4_roundtrip_bitwise(patch):
    assert np.array_equal(decode_patch(encode_patch(patch, 4)), patch)


@given(st.integers(0, 255), st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_constant_gray_survives_lossy_levels(g, level):
    patch = np.full((8, 8, 3), g, dtype=np.uint8)
    assert np.array_equal(decode_patch(encode_patch(patch, level)), patch)


def test_level0_decodes_to_mid_gray():
    rec = decode_patch(PatchPayload(0, b""))
    assert np.array_equal(rec, np.full((8, 8, 3), 128, dtype=np.uint8))


def test_payload_length_mismatch_rejected():
    with pytest.raises(FormatError, match="bytes"):
        decode_patch(PatchPayload(2, b"\x00" * 23))


def test_mse_non_increasing_in_level_on_smooth_fields():
    rng = np.random.default_rng(42)
    mses = np.zeros(5)
    n = 300
    for _ in range(n):
        low = rng.random((3, 3, 3)).astype(np.float32) * 255
        smooth = np.stack([bilinear_resize(low[c][None], 8, 8)[0] for c in range(3)], axis=-1)
        patch = np.clip(smooth + rng.normal(0, 6, smooth.shape), 0, 255).astype(np.uint8)
        for lvl in range(5):
            rec = decode_patch(encode_patch(patch, lvl))
            mses[lvl] += ((rec.astype(np.float64) - patch) ** 2).mean()
    mses /= n
    assert all(mses[i] >= mses[i + 1] for i in range(4))
    assert mses[4] == 0.0


# -------------------------------------------------------------------- ycbcr


@given(st.integers(0, 255))
def test_gray_maps_to_neutral_chroma_and_back(g):
    y, cb, cr = rgb_to_ycbcr(g, g, g)
    assert (int(y), int(cb), int(cr)) == (g, 128, 128)
    assert tuple(int(v) for v in ycbcr_to_rgb(y, cb, cr)) == (g, g, g)


def test_pure_red_roundtrip_within_3():
    y, cb, cr = rgb_to_ycbcr(255, 0, 0)
    r, g, b = (int(v) for v in ycbcr_to_rgb(y, cb, cr))
    assert abs(r - 255) <= 3 and abs(g) <= 3 and abs(b) <= 3


def test_ycbcr_lattice_roundtrip_error_bound():
    # 64^3 lattice including 0 and 255; exhaustive 2^24 sweep gives max error 2
    vals = np.unique(np.linspace(0, 255, 64).round().astype(np.int32))
    r, g, b = np.meshgrid(vals, vals, vals, indexing="ij")
    y, cb, cr = rgb_to_ycbcr(r, g, b)
    r2, g2, b2 = ycbcr_to_rgb(y, cb, cr)
    for orig, rec in ((r, r2), (g, g2), (b, b2)):
        assert int(np.abs(rec.astype(np.int32) - orig).max()) <= 3


# -------------------------------------------------------------------- frame


def image_16x16(seed=0):
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))


def plan_for(levels, budget=None):
    levels = np.asarray(levels, dtype=np.uint8)
    total = int(np.asarray(TABLE.rates)[levels].sum())
    return AllocationPlan(levels=levels, table=TABLE, total=total, budget=budget or total)


def test_frame_header_golden_bytes():
    img = RasterImage(np.zeros((16, 16, 3), dtype=np.uint8))
    frame = encode_frame(img, plan_for([0, 0, 0, 0]))
    data = frame.to_bytes()
    expected_header = (
        b"MMSF"
        + b"\x01"
        + b"\x10\x00"  # height 16
        + b"\x10\x00"  # width 16
        + b"\x08"
        + b"\x03"
        + b"\x05"
        + b"\x00\x00\x00\x00"
        + b"\x0c\x00\x00\x00"
        + b"\x18\x00\x00\x00"
        + b"\x30\x00\x00\x00"
        + b"\xc0\x00\x00\x00"
        + b"\x00\x00\x00\x00"  # level map
    )
    assert data == expected_header
    assert len(data) == 12 + 20 + 4


def test_mixed_plan_payload_size():
    frame = encode_frame(image_16x16(), plan_for([4, 3, 1, 0]))
    assert frame.payload_size == 192 + 48 + 12 + 0 == 252


def test_all_level4_roundtrip_bitwise():
    img = image_16x16(1)
    frame = encode_frame(img, uniform_plan(4, TABLE, 4))
    assert decode_frame(EncodedFrame.from_bytes(frame.to_bytes())) == img


def test_all_level0_gives_gray_image():
    img = image_16x16(2)
    frame = encode_frame(img, uniform_plan(4, TABLE, 0))
    rec = decode_frame(frame)
    assert np.array_equal(rec.pixels, np.full((16, 16, 3), 128, dtype=np.uint8))
    assert len(frame.to_bytes()) == 12 + 20 + 4  # header + rate table + level map only


def test_frame_serialization_roundtrip_and_determinism():
    img = image_16x16(3)
    plan = plan_for([2, 4, 0, 3])
    f1 = encode_frame(img, plan)
    f2 = encode_frame(img, plan)
    assert f1.to_bytes() == f2.to_bytes()
    parsed = EncodedFrame.from_bytes(f1.to_bytes())
    assert parsed.levels.tolist() == [2, 4, 0, 3]
    assert decode_frame(parsed) == decode_frame(f1)


def test_level4_regions_survive_mixed_plan():
    img = image_16x16(4)
    frame = encode_frame(img, plan_for([4, 0, 0, 4]))
    rec = decode_frame(frame).pixels
    assert np.array_equal(rec[:8, :8], img.pixels[:8, :8])
    assert np.array_equal(rec[8:, 8:], img.pixels[8:, 8:])


def test_frame_bad_magic_truncation_trailing():
    frame = encode_frame(image_16x16(5), plan_for([1, 1, 1, 1])).to_bytes()
    with pytest.raises(FormatError, match="magic"):
        EncodedFrame.from_bytes(b"XXXX" + frame[4:])
    with pytest.raises(FormatError, match="truncated"):
        EncodedFrame.from_bytes(frame[:-1])
    with pytest.raises(FormatError, match="trailing"):
        EncodedFrame.from_bytes(frame + b"\x00")


def test_frame_level_map_out_of_range():
    frame = encode_frame(image_16x16(6), plan_for([0, 0, 0, 0]))
    data = bytearray(frame.to_bytes())
    data[32] = 7  # first level-map byte
    with pytest.raises(FormatError, match="level"):
        EncodedFrame.from_bytes(bytes(data))


def test_plan_image_size_mismatch():
    with pytest.raises(ValueError, match="patches"):
        encode_frame(image_16x16(7), plan_for([0, 0]))
