"""Fixed-budget analytic patch codecs and the bit-exact frame container.

Five levels encode an 8x8 RGB patch into exactly 0, 12, 24, 48, or 192
bytes: skip, 2x2 RGB, 4x4 luma + 2x2 chroma, 4x4 RGB, and raw copy.
Downsampling is integer block averaging with round-half-up shifts; decoding
replicates each stored sample over its source block (nearest neighbor), so
constant patches survive the lossy levels exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .allocation import DEFAULT_RATES, AllocationPlan, PatchGrid, RateTable
from .errors import FormatError
from .tensors import RasterImage

FRAME_MAGIC = b"MMSF"
FRAME_VERSION = 1
PATCH_SIZE = 8
LEVEL_FILL = 128  # receiver-side fill for skipped patches


@dataclass(frozen=True)
class PatchPayload:
    level: int
    data: bytes


def _block_mean(plane: np.ndarray, block: int, bias: int, shift: int) -> np.ndarray:
    """Average block x block cells with rounding (sum + bias) >> shift."""
    h, w = plane.shape
    sums = plane.astype(np.uint32).reshape(h // block, block, w // block, block).sum(axis=(1, 3))
    return ((sums + bias) >> shift).astype(np.uint8)


def rgb_to_ycbcr(r, g, b):
    """Fixed-point RGB -> YCbCr; channel-wise exact for gray inputs."""
    r = np.asarray(r, dtype=np.int32)
    g = np.asarray(g, dtype=np.int32)
    b = np.asarray(b, dtype=np.int32)
    y = (77 * r + 150 * g + 29 * b + 128) >> 8
    cb = np.clip(((-43 * r - 85 * g + 128 * b + 128) >> 8) + 128, 0, 255)
    cr = np.clip(((128 * r - 107 * g - 21 * b + 128) >> 8) + 128, 0, 255)
    return y.astype(np.uint8), cb.astype(np.uint8), cr.astype(np.uint8)


def ycbcr_to_rgb(y, cb, cr):
    """Inverse fixed-point transform; roundtrip error is at most 3 per channel."""
    y = np.asarray(y, dtype=np.int32)
    dcb = np.asarray(cb, dtype=np.int32) - 128
    dcr = np.asarray(cr, dtype=np.int32) - 128
    r = np.clip(y + ((359 * dcr + 128) >> 8), 0, 255)
    g = np.clip(y - ((88 * dcb + 183 * dcr + 128) >> 8), 0, 255)
    b = np.clip(y + ((454 * dcb + 128) >> 8), 0, 255)
    return r.astype(np.uint8), g.astype(np.uint8), b.astype(np.uint8)


def _check_patch(patch: np.ndarray) -> np.ndarray:
    arr = np.asarray(patch)
    if arr.shape != (PATCH_SIZE, PATCH_SIZE, 3) or arr.dtype != np.uint8:
        raise ValueError(f"patch must be {PATCH_SIZE}x{PATCH_SIZE}x3 uint8, got {arr.dtype}{arr.shape}")
    return arr


def _encode_for_rate(arr: np.ndarray, rate: int) -> bytes:
    if rate == 0:
        return b""
    if rate == 12:
        # 2x2 RGB: 4x4 blocks, (sum + 8) >> 4
        planes = [_block_mean(arr[:, :, c], 4, 8, 4) for c in range(3)]
        return np.stack(planes, axis=-1).tobytes()
    if rate == 24:
        # 4x4 Y plane then 2x2 Cb, Cr planes
        y, cb, cr = rgb_to_ycbcr(arr[:, :, 0], arr[:, :, 1], arr[:, :, 2])
        return (
            _block_mean(y, 2, 2, 2).tobytes()
            + _block_mean(cb, 4, 8, 4).tobytes()
            + _block_mean(cr, 4, 8, 4).tobytes()
        )
    if rate == 48:
        # 4x4 RGB: 2x2 blocks, (sum + 2) >> 2
        planes = [_block_mean(arr[:, :, c], 2, 2, 2) for c in range(3)]
        return np.stack(planes, axis=-1).tobytes()
    if rate == 192:
        return arr.tobytes()
    raise ValueError(f"no patch codec for {rate} bytes")


def _replicate(plane: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(np.repeat(plane, factor, axis=0), factor, axis=1)


def _decode_for_rate(data: bytes, rate: int) -> np.ndarray:
    if len(data) != rate:
        raise FormatError(f"payload must be {rate} bytes, got {len(data)}")
    if rate == 0:
        return np.full((PATCH_SIZE, PATCH_SIZE, 3), LEVEL_FILL, dtype=np.uint8)
    if rate == 12:
        small = np.frombuffer(data, dtype=np.uint8).reshape(2, 2, 3)
        return np.stack([_replicate(small[:, :, c], 4) for c in range(3)], axis=-1)
    if rate == 24:
        y = _replicate(np.frombuffer(data[:16], dtype=np.uint8).reshape(4, 4), 2)
        cb = _replicate(np.frombuffer(data[16:20], dtype=np.uint8).reshape(2, 2), 4)
        cr = _replicate(np.frombuffer(data[20:], dtype=np.uint8).reshape(2, 2), 4)
        r, g, b = ycbcr_to_rgb(y, cb, cr)
        return np.stack([r, g, b], axis=-1)
    if rate == 48:
        small = np.frombuffer(data, dtype=np.uint8).reshape(4, 4, 3)
        return np.stack([_replicate(small[:, :, c], 2) for c in range(3)], axis=-1)
    if rate == 192:
        return np.frombuffer(data, dtype=np.uint8).reshape(PATCH_SIZE, PATCH_SIZE, 3).copy()
    raise FormatError(f"no patch codec for {rate} bytes")


def encode_patch(patch: np.ndarray, level: int) -> PatchPayload:
    """Encode one patch at a canonical level; payload length is exact by level."""
    arr = _check_patch(patch)
    if not 0 <= level < len(DEFAULT_RATES):
        raise ValueError(f"invalid level {level}")
    return PatchPayload(level, _encode_for_rate(arr, DEFAULT_RATES[level]))


def decode_patch(payload: PatchPayload) -> np.ndarray:
    """Reconstruct an 8x8x3 patch from one canonical-level payload."""
    if not 0 <= payload.level < len(DEFAULT_RATES):
        raise ValueError(f"invalid level {payload.level}")
    return _decode_for_rate(payload.data, DEFAULT_RATES[payload.level])


@dataclass(frozen=True)
class EncodedFrame:
    """Transmission unit: geometry, rate table, level map, and payload bytes."""

    height: int
    width: int
    patch_size: int
    table: RateTable
    levels: np.ndarray  # (P,) uint8, row-major patch order
    payload: bytes  # concatenated patch payloads, row-major

    @property
    def payload_size(self) -> int:
        return len(self.payload)

    def to_bytes(self) -> bytes:
        head = [
            FRAME_MAGIC,
            struct.pack("<B", FRAME_VERSION),
            struct.pack("<H", self.height),
            struct.pack("<H", self.width),
            struct.pack("<B", self.patch_size),
            struct.pack("<B", 3),
            struct.pack("<B", self.table.levels),
        ]
        head.extend(struct.pack("<I", r) for r in self.table.rates)
        return b"".join(head) + self.levels.tobytes() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedFrame":
        if len(data) < 12:
            raise FormatError("frame shorter than fixed header")
        if data[:4] != FRAME_MAGIC:
            raise FormatError(f"bad frame magic {data[:4]!r}")
        version = data[4]
        if version != FRAME_VERSION:
            raise FormatError(f"unknown frame version {version}")
        height, width = struct.unpack_from("<HH", data, 5)
        patch_size, channels, n_levels = data[9], data[10], data[11]
        if channels != 3:
            raise FormatError(f"unsupported channel count {channels}")
        pos = 12
        if len(data) < pos + 4 * n_levels:
            raise FormatError("truncated frame: rate table")
        rates = struct.unpack_from(f"<{n_levels}I", data, pos)
        pos += 4 * n_levels
        try:
            table = RateTable(tuple(int(r) for r in rates))
            grid = PatchGrid.for_image(height, width, patch_size)
        except ValueError as e:
            raise FormatError(str(e)) from None
        p = grid.patch_count
        if len(data) < pos + p:
            raise FormatError("truncated frame: level map")
        levels = np.frombuffer(data, dtype=np.uint8, count=p, offset=pos).copy()
        pos += p
        if levels.max(initial=0) >= table.levels:
            raise FormatError("level map references level outside rate table")
        payload_len = int(np.asarray(table.rates)[levels].sum())
        if len(data) < pos + payload_len:
            raise FormatError("truncated frame: payload section")
        if len(data) > pos + payload_len:
            raise FormatError("trailing bytes after payload section")
        return cls(
            height=height,
            width=width,
            patch_size=patch_size,
            table=table,
            levels=levels,
            payload=data[pos:],
        )


def encode_frame(image: RasterImage, plan: AllocationPlan) -> EncodedFrame:
    """Encode a whole image according to an allocation plan."""
    grid = PatchGrid.for_image(image.height, image.width, PATCH_SIZE)
    if plan.patch_count != grid.patch_count:
        raise ValueError(
            f"plan covers {plan.patch_count} patches, image has {grid.patch_count}"
        )
    px = image.pixels
    rates = plan.table.rates
    chunks = []
    i = 0
    for r in range(grid.rows):
        for c in range(grid.cols):
            patch = px[r * PATCH_SIZE : (r + 1) * PATCH_SIZE, c * PATCH_SIZE : (c + 1) * PATCH_SIZE]
            chunks.append(_encode_for_rate(patch, rates[int(plan.levels[i])]))
            i += 1
    return EncodedFrame(
        height=image.height,
        width=image.width,
        patch_size=PATCH_SIZE,
        table=plan.table,
        levels=plan.levels.astype(np.uint8, copy=True),
        payload=b"".join(chunks),
    )


def decode_frame(frame: EncodedFrame) -> RasterImage:
    """Reassemble the image by decoding patches into their original positions."""
    if frame.patch_size != PATCH_SIZE:
        raise FormatError(f"unsupported patch size {frame.patch_size}")
    grid = PatchGrid.for_image(frame.height, frame.width, PATCH_SIZE)
    rates = frame.table.rates
    out = np.empty((frame.height, frame.width, 3), dtype=np.uint8)
    pos = 0
    i = 0
    for r in range(grid.rows):
        for c in range(grid.cols):
            lvl = int(frame.levels[i])
            size = rates[lvl]
            chunk = frame.payload[pos : pos + size]
            if len(chunk) != size:
                raise FormatError("level map references missing payload bytes")
            out[
                r * PATCH_SIZE : (r + 1) * PATCH_SIZE,
                c * PATCH_SIZE : (c + 1) * PATCH_SIZE,
            ] = _decode_for_rate(chunk, size)
            pos += size
            i += 1
    return RasterImage(out)
