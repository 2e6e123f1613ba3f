import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings
from hypothesis import strategies as st

from semtx.allocation import PatchScores, RateTable, allocate
from semtx.codec import encode_frame
from semtx.errors import CapacityError
from semtx.tensors import RasterImage
from semtx.transport import ChannelConfig, transmit

TABLE = RateTable()


def frame_with_payload(levels):
    rng = np.random.default_rng(0)
    img = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
    s = PatchScores(np.linspace(1, 0, 4, dtype=np.float32))
    plan = allocate(s, TABLE, sum(TABLE.rates[l] for l in levels))
    return encode_frame(img, plan)


def test_boundary_inclusive():
    frame = frame_with_payload([4, 3, 0, 0])  # 240 bytes
    assert frame.payload_size == 240
    assert transmit(frame, ChannelConfig(budget=240)) is frame


def test_boundary_exceeded():
    frame = frame_with_payload([4, 3, 0, 0])
    with pytest.raises(CapacityError) as err:
        transmit(frame, ChannelConfig(budget=239))
    assert err.value.payload_bytes == 240 and err.value.budget_bytes == 239


def test_half_rate_reference_budget():
    cfg = ChannelConfig(rate=Fraction(1, 2))
    assert cfg.resolve_budget(2400, 192) == 230400


def test_config_validation():
    with pytest.raises(ValueError, match="exactly one"):
        ChannelConfig()
    with pytest.raises(ValueError, match="exactly one"):
        ChannelConfig(budget=1, rate=0.5)
    with pytest.raises(ValueError, match=">= 0"):
        ChannelConfig(budget=-1)
    with pytest.raises(ValueError, match="outside"):
        ChannelConfig(rate=1.2)


@given(
    st.lists(st.floats(0, 1, width=32), min_size=4, max_size=4),
    st.integers(0, 4 * 192),
)
@settings(max_examples=80, deadline=None)
def test_planned_frames_always_fit_their_budget(scores, budget):
    rng = np.random.default_rng(1)
    img = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
    plan = allocate(PatchScores(np.asarray(scores, dtype=np.float32)), TABLE, budget)
    frame = encode_frame(img, plan)
    assert transmit(frame, ChannelConfig(budget=budget)) is frame
