"""Binary interchange containers: named-tensor archives (.mmta) and PPM/PGM rasters.

All multi-byte integers are little-endian. Archives hold float32 or uint8
tensors only; rasters are 8-bit. Writers are deterministic: equal values
produce identical byte streams.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO, Iterable

import numpy as np

from .errors import FormatError

ARCHIVE_MAGIC = b"MMTA"
ARCHIVE_VERSION = 1
MAX_NAME_BYTES = 255

_DTYPE_TO_CODE = {"float32": 0, "uint8": 1}
_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("u1")}


def _as_supported_array(array: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(array)
    if arr.dtype.name not in _DTYPE_TO_CODE:
        raise ValueError(f"unsupported tensor dtype {arr.dtype}, need float32 or uint8")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


class Tensor:
    """A named, immutable float32/uint8 array; row-major, last index fastest."""

    __slots__ = ("name", "array")

    def __init__(self, name: str, array: np.ndarray):
        if not name:
            raise ValueError("tensor name must be non-empty")
        if len(name.encode("utf-8")) > MAX_NAME_BYTES:
            raise ValueError(f"tensor name longer than {MAX_NAME_BYTES} UTF-8 bytes")
        self.name = name
        self.array = _as_supported_array(array)

    @property
    def dtype(self) -> str:
        return self.array.dtype.name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.name == other.name
            and self.dtype == other.dtype
            and self.shape == other.shape
            and np.array_equal(self.array, other.array)
        )

    def __repr__(self) -> str:
        return f"Tensor({self.name!r}, dtype={self.dtype}, shape={self.shape})"


class TensorArchive:
    """Ordered collection of uniquely named tensors (container version 1)."""

    def __init__(self, entries: Iterable[Tensor] = ()):
        self.version = ARCHIVE_VERSION
        self.entries: list[Tensor] = []
        self._by_name: dict[str, Tensor] = {}
        for t in entries:
            self.add(t)

    def add(self, tensor: Tensor) -> None:
        if tensor.name in self._by_name:
            raise ValueError(f"duplicate tensor name {tensor.name!r}")
        self.entries.append(tensor)
        self._by_name[tensor.name] = tensor

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._by_name[name].array
        except KeyError:
            raise KeyError(f"archive has no tensor named {name!r}") from None

    def get(self, name: str, default=None):
        t = self._by_name.get(name)
        return t.array if t is not None else default

    def names(self) -> list[str]:
        return [t.name for t in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorArchive):
            return NotImplemented
        return self.version == other.version and self.entries == other.entries


def write_archive(archive: TensorArchive, sink: BinaryIO) -> int:
    """Serialize an archive; returns the number of bytes written."""
    count = 0

    def put(b: bytes) -> None:
        nonlocal count
        sink.write(b)
        count += len(b)

    put(ARCHIVE_MAGIC)
    put(struct.pack("<B", archive.version))
    put(struct.pack("<I", len(archive.entries)))
    for t in archive.entries:
        name = t.name.encode("utf-8")
        put(struct.pack("<B", len(name)))
        put(name)
        put(struct.pack("<B", _DTYPE_TO_CODE[t.dtype]))
        put(struct.pack("<B", t.array.ndim))
        for dim in t.shape:
            put(struct.pack("<I", dim))
        if t.dtype == "float32":
            put(t.array.astype("<f4", copy=False).tobytes())
        else:
            put(t.array.tobytes())
    return count


def archive_to_bytes(archive: TensorArchive) -> bytes:
    buf = io.BytesIO()
    write_archive(archive, buf)
    return buf.getvalue()


class _Reader:
    def __init__(self, source: BinaryIO):
        self.source = source

    def take(self, n: int) -> bytes:
        data = self.source.read(n)
        if len(data) != n:
            raise FormatError(f"truncated stream: wanted {n} bytes, got {len(data)}")
        return data

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_archive(source: BinaryIO | bytes) -> TensorArchive:
    """Parse an archive stream; rejects trailing bytes after the last entry."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    r = _Reader(source)
    magic = r.take(4)
    if magic != ARCHIVE_MAGIC:
        raise FormatError(f"bad archive magic {magic!r}")
    version = r.u8()
    if version != ARCHIVE_VERSION:
        raise FormatError(f"unknown archive version {version}")
    n_entries = r.u32()
    archive = TensorArchive()
    for _ in range(n_entries):
        name_len = r.u8()
        if name_len == 0:
            raise FormatError("empty tensor name")
        name = r.take(name_len).decode("utf-8")
        code = r.u8()
        if code not in _CODE_TO_DTYPE:
            raise FormatError(f"unknown dtype code {code}")
        dtype = _CODE_TO_DTYPE[code]
        ndim = r.u8()
        shape = tuple(r.u32() for _ in range(ndim))
        n_elems = 1
        for dim in shape:
            n_elems *= dim
        raw = r.take(n_elems * dtype.itemsize)
        arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
        try:
            archive.add(Tensor(name, arr))
        except ValueError as e:
            raise FormatError(str(e)) from None
    if source.read(1) != b"":
        raise FormatError("trailing bytes after last archive entry")
    return archive


def save_archive(archive: TensorArchive, path) -> int:
    with open(path, "wb") as f:
        return write_archive(archive, f)


def load_archive(path) -> TensorArchive:
    with open(path, "rb") as f:
        return read_archive(f)


class RasterImage:
    """8-bit interleaved RGB image, stored as an (h, w, 3) uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.ascontiguousarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 pixels, got {arr.dtype}{arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"


def _read_netpbm_header(r: _Reader, magic: bytes) -> tuple[int, int]:
    got = r.take(2)
    if got != magic:
        raise FormatError(f"unsupported raster format {got!r}, expected {magic.decode()}")

    def next_token() -> int:
        # Skip whitespace and '#' comment lines between header fields.
        tok = b""
        while True:
            c = r.take(1)
            if c == b"#":
                while r.take(1) not in b"\r\n":
                    pass
                continue
            if c.isspace():
                if tok:
                    return int(tok)
                continue
            if not c.isdigit():
                raise FormatError(f"bad header byte {c!r}")
            tok += c

    width = next_token()
    height = next_token()
    maxval = next_token()
    # next_token consumed exactly one whitespace byte after maxval
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, must be 255")
    if width <= 0 or height <= 0:
        raise FormatError(f"bad raster dims {width}x{height}")
    return width, height


def read_ppm(source: BinaryIO | bytes) -> RasterImage:
    """Parse a binary PPM (P6, maxval 255)."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    r = _Reader(source)
    width, height = _read_netpbm_header(r, b"P6")
    raw = r.take(width * height * 3)
    if source.read(1) != b"":
        raise FormatError("trailing bytes after PPM pixel data")
    return RasterImage(np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3))


def write_ppm(image: RasterImage) -> bytes:
    header = f"P6 {image.width} {image.height} 255\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_pgm(source: BinaryIO | bytes) -> np.ndarray:
    """Parse a binary PGM (P5, maxval 255) into an (h, w) uint8 array."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    r = _Reader(source)
    width, height = _read_netpbm_header(r, b"P5")
    raw = r.take(width * height)
    if source.read(1) != b"":
        raise FormatError("trailing bytes after PGM pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(values: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(values)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"expected (h, w) uint8 values, got {arr.dtype}{arr.shape}")
    header = f"P5 {arr.shape[1]} {arr.shape[0]} 255\n".encode("ascii")
    return header + arr.tobytes()


def load_ppm(path) -> RasterImage:
    with open(path, "rb") as f:
        return read_ppm(f)


def save_ppm(image: RasterImage, path) -> None:
    with open(path, "wb") as f:
        f.write(write_ppm(image))


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_pgm(f)


def save_pgm(values: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(write_pgm(values))
