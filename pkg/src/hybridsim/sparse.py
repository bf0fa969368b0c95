"""Bitmap-compressed sparse operands.

A fiber is one row (activations) or one column (weights) stored as an
occupancy bitmap plus the packed nonzero INT8 values in position order.
Fibers travel in 128-bit chunks.

Bit order everywhere is little-endian by position: bit ``i`` of a chunk
window (and of the serialized bitmap bytes) describes logical position
``i``; byte ``b`` holds positions ``8b .. 8b+7`` with position ``8b`` in
its least significant bit.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import DimensionError, StructuralError

CHUNK_BITS = 128
BEAT_VALUES = 16  # packed INT8 values per 128-bit crossbar beat
MAX_LENGTH = 1 << 24

MAGIC = b"NFBM"
FORMAT_VERSION = 1
ROW_MAJOR = 0
COL_MAJOR = 1
_HEADER = struct.Struct("<4sHIIB")
_FIBER_LEN = struct.Struct("<I")


def as_bits(bits) -> np.ndarray:
    """Coerce a '1010' string, bool/int sequence or array into a bool array."""
    if isinstance(bits, str):
        return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == ord("1")
    arr = np.asarray(bits)
    if arr.dtype != np.bool_:
        arr = arr != 0
    return arr.reshape(-1)


def _as_int8(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and (arr.min() < -128 or arr.max() > 127):
        raise ValueError("values outside signed 8-bit range")
    return arr.astype(np.int8).reshape(-1)


@dataclass(frozen=True, eq=False)
class BitmapVector:
    length: int
    bits: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bits = as_bits(self.bits)
        values = _as_int8(self.values)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "values", values)
        bits.flags.writeable = False
        values.flags.writeable = False
        if bits.shape[0] != self.length:
            raise StructuralError(f"bitmap has {bits.shape[0]} bits, expected {self.length}")
        nnz = int(bits.sum())
        if nnz != values.shape[0]:
            raise StructuralError(f"popcount {nnz} != {values.shape[0]} packed values")
        if np.any(values == 0):
            raise StructuralError("packed value of zero under a set bit")

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        if not isinstance(other, BitmapVector):
            return NotImplemented
        return (self.length == other.length
                and np.array_equal(self.bits, other.bits)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        bits = "".join("1" if b else "0" for b in self.bits[:32])
        more = "..." if self.length > 32 else ""
        return f"BitmapVector(length={self.length}, bits={bits}{more}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class Chunk:
    seq: int
    bit_window: np.ndarray
    payload: np.ndarray

    def __post_init__(self):
        if self.bit_window.shape[0] != CHUNK_BITS:
            raise StructuralError("chunk window must be 128 bits")
        if int(self.bit_window.sum()) != self.payload.shape[0]:
            raise StructuralError("chunk payload does not match popcount")

    @property
    def beats(self) -> int:
        """128-bit crossbar transfers: one for the bitmap plus the packed values."""
        return 1 + -(-int(self.payload.shape[0]) // BEAT_VALUES)


@dataclass(frozen=True, eq=False)
class MatchList:
    indices: np.ndarray
    a_offsets: np.ndarray
    b_offsets: np.ndarray

    def __len__(self):
        return int(self.indices.shape[0])


def compress(dense) -> BitmapVector:
    arr = _as_int8(dense)
    if arr.shape[0] > MAX_LENGTH:
        raise DimensionError(f"vector longer than {MAX_LENGTH}")
    bits = arr != 0
    return BitmapVector(arr.shape[0], bits, arr[bits])


def decompress(v: BitmapVector) -> np.ndarray:
    bits = as_bits(v.bits)
    if bits.shape[0] != v.length or int(bits.sum()) != len(v.values):
        raise StructuralError("malformed bitmap vector")
    out = np.zeros(v.length, dtype=np.int8)
    out[bits] = v.values
    return out


def chunk_iter(v: BitmapVector) -> list[Chunk]:
    n_chunks = -(-v.length // CHUNK_BITS)
    padded = np.zeros(n_chunks * CHUNK_BITS, dtype=bool)
    padded[: v.length] = v.bits
    windows = padded.reshape(n_chunks, CHUNK_BITS)
    bounds = np.concatenate(([0], np.cumsum(windows.sum(axis=1))))
    return [Chunk(seq, windows[seq].copy(), v.values[bounds[seq]:bounds[seq + 1]])
            for seq in range(n_chunks)]


def prefix_offsets(bits, positions) -> np.ndarray:
    """Exclusive prefix popcount of ``bits`` at each of ``positions``."""
    bits = as_bits(bits)
    pos = np.asarray(positions, dtype=np.int64).reshape(-1)
    if pos.size == 0:
        return np.zeros(0, dtype=np.int64)
    if pos.min() < 0 or pos.max() >= bits.shape[0]:
        raise IndexError("position outside bitmap")
    if np.any(np.diff(pos) < 0):
        raise ValueError("positions must be ascending")
    exclusive = np.concatenate(([0], np.cumsum(bits, dtype=np.int64)))
    return exclusive[pos]


def _check_lengths(a, b):
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"bitmap lengths differ: {a.shape[0]} vs {b.shape[0]}")


def inner_join(a_bits, b_bits) -> MatchList:
    a = as_bits(a_bits)
    b = as_bits(b_bits)
    _check_lengths(a, b)
    idx = np.flatnonzero(a & b)
    return MatchList(idx, prefix_offsets(a, idx), prefix_offsets(b, idx))


def match_count(a_bits, b_bits) -> int:
    a = as_bits(a_bits)
    b = as_bits(b_bits)
    _check_lengths(a, b)
    return int(np.count_nonzero(a & b))


@dataclass(frozen=True, eq=False)
class BitmapMatrix:
    """Matrix stored as fibers: one per row (ROW_MAJOR) or per column (COL_MAJOR)."""

    rows: int
    cols: int
    fibers: tuple
    layout: int = ROW_MAJOR

    def __post_init__(self):
        object.__setattr__(self, "fibers", tuple(self.fibers))
        n_fibers, length = (self.rows, self.cols) if self.layout == ROW_MAJOR else (self.cols, self.rows)
        if len(self.fibers) != n_fibers:
            raise StructuralError(f"expected {n_fibers} fibers, got {len(self.fibers)}")
        for f in self.fibers:
            if f.length != length:
                raise StructuralError(f"fiber length {f.length} != shared dimension {length}")

    @classmethod
    def from_dense(cls, dense, layout=ROW_MAJOR) -> BitmapMatrix:
        arr = np.asarray(dense)
        if arr.ndim != 2:
            raise DimensionError("dense matrix must be 2-D")
        lines = arr if layout == ROW_MAJOR else arr.T
        return cls(arr.shape[0], arr.shape[1], tuple(compress(line) for line in lines), layout)

    def to_dense(self) -> np.ndarray:
        if not self.fibers:
            return np.zeros((self.rows, self.cols), dtype=np.int8)
        stacked = np.stack([decompress(f) for f in self.fibers])
        return stacked if self.layout == ROW_MAJOR else stacked.T.copy()

    def bitmap(self) -> np.ndarray:
        """Dense (rows, cols) occupancy matrix."""
        if not self.fibers:
            return np.zeros((self.rows, self.cols), dtype=bool)
        stacked = np.stack([f.bits for f in self.fibers])
        return stacked if self.layout == ROW_MAJOR else stacked.T.copy()

    @property
    def nnz(self) -> int:
        return sum(f.nnz for f in self.fibers)

    def __eq__(self, other):
        if not isinstance(other, BitmapMatrix):
            return NotImplemented
        return (self.rows == other.rows and self.cols == other.cols
                and self.layout == other.layout
                and all(a == b for a, b in zip(self.fibers, other.fibers)))


# ---------------------------------------------------------------------------
# interchange file


def _write_one(fh: BinaryIO, m: BitmapMatrix):
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, m.rows, m.cols, m.layout))
    for f in m.fibers:
        fh.write(_FIBER_LEN.pack(f.length))
        fh.write(np.packbits(f.bits, bitorder="little").tobytes())
        fh.write(f.values.tobytes())


def _read_exact(fh, n):
    data = fh.read(n)
    if len(data) != n:
        raise StructuralError("truncated matrix file")
    return data


def _read_one(fh: BinaryIO) -> BitmapMatrix | None:
    head = fh.read(_HEADER.size)
    if not head:
        return None
    if len(head) != _HEADER.size:
        raise StructuralError("truncated header")
    magic, version, rows, cols, layout = _HEADER.unpack(head)
    if magic != MAGIC:
        raise StructuralError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StructuralError(f"unsupported version {version}")
    if layout not in (ROW_MAJOR, COL_MAJOR):
        raise StructuralError(f"bad layout flag {layout}")
    n_fibers = rows if layout == ROW_MAJOR else cols
    fibers = []
    for _ in range(n_fibers):
        (length,) = _FIBER_LEN.unpack(_read_exact(fh, _FIBER_LEN.size))
        raw = np.frombuffer(_read_exact(fh, -(-length // 8)), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:length].astype(bool)
        nnz = int(bits.sum())
        values = np.frombuffer(_read_exact(fh, nnz), dtype=np.int8)
        fibers.append(BitmapVector(length, bits, values))
    return BitmapMatrix(rows, cols, tuple(fibers), layout)


def dumps_matrices(matrices: Iterable[BitmapMatrix]) -> bytes:
    buf = io.BytesIO()
    for m in matrices:
        _write_one(buf, m)
    return buf.getvalue()


def loads_matrices(data: bytes) -> list[BitmapMatrix]:
    buf = io.BytesIO(data)
    out = []
    while (m := _read_one(buf)) is not None:
        out.append(m)
    return out


def write_matrices(path, matrices: Sequence[BitmapMatrix] | BitmapMatrix):
    if isinstance(matrices, BitmapMatrix):
        matrices = [matrices]
    with open(path, "wb") as fh:
        fh.write(dumps_matrices(matrices))


def read_matrices(path) -> list[BitmapMatrix]:
    with open(path, "rb") as fh:
        return loads_matrices(fh.read())
