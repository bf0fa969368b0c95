import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsim.errors import DimensionError, StructuralError
from hybridsim.sparse import (
    BitmapMatrix, BitmapVector, COL_MAJOR, ROW_MAJOR, as_bits, chunk_iter, compress,
    decompress, dumps_matrices, inner_join, loads_matrices, match_count, prefix_offsets,
    read_matrices, write_matrices,
)

int8s = st.integers(min_value=-128, max_value=127)


def scan_join(a, b):
    """Position-by-position oracle."""
    idx, ao, bo = [], [], []
    ca = cb = 0
    for k in range(len(a)):
        if a[k] and b[k]:
            idx.append(k)
            ao.append(ca)
            bo.append(cb)
        ca += int(a[k])
        cb += int(b[k])
    return idx, ao, bo


def test_compress_examples():
    v = compress([0, 0, 0, 0])
    assert v.bits.tolist() == [False] * 4 and v.values.tolist() == []
    v = compress([3, 0, -2, 0])
    assert v.bits.tolist() == [True, False, True, False]
    assert v.values.tolist() == [3, -2]


def test_decompress_examples():
    assert decompress(BitmapVector(4, "0000", [])).tolist() == [0, 0, 0, 0]
    assert decompress(BitmapVector(4, "1010", [3, -2])).tolist() == [3, 0, -2, 0]


def test_malformed_vector_rejected():
    with pytest.raises(StructuralError):
        BitmapVector(4, "1010", [3])
    with pytest.raises(StructuralError):
        BitmapVector(4, "1010", [3, 0])
    with pytest.raises(StructuralError):
        BitmapVector(5, "1010", [3, 1])


def test_random_512_roundtrip():
    rng = np.random.default_rng(0)
    x = np.where(rng.random(512) < 0.25, rng.integers(-128, 128, 512), 0).astype(np.int8)
    assert np.array_equal(decompress(compress(x)), x)


@pytest.mark.parametrize("n", range(1, 13))
def test_roundtrip_exhaustive_small(n):
    # every occupancy pattern with fixed nonzero values
    for pattern in itertools.product((0, 1), repeat=n):
        x = np.array(pattern, dtype=np.int8) * np.int8(-7)
        assert np.array_equal(decompress(compress(x)), x)


@settings(max_examples=1000, deadline=None)
@given(st.lists(int8s, min_size=0, max_size=300))
def test_roundtrip_property(xs):
    x = np.array(xs, dtype=np.int8)
    v = compress(x)
    assert v.nnz == np.count_nonzero(x)
    assert np.array_equal(decompress(v), x)


def test_chunk_examples():
    x = np.zeros(128, dtype=np.int8)
    x[[1, 5, 9, 100, 127]] = 4
    chunks = chunk_iter(compress(x))
    assert len(chunks) == 1 and chunks[0].payload.size == 5

    chunks = chunk_iter(compress(np.ones(300, dtype=np.int8)))
    assert [c.seq for c in chunks] == [0, 1, 2]
    assert chunks[2].bit_window[:300 - 256].all()
    assert not chunks[2].bit_window[300 - 256:].any()


@settings(max_examples=200, deadline=None)
@given(st.lists(int8s, min_size=1, max_size=700))
def test_chunk_partition(xs):
    v = compress(np.array(xs, dtype=np.int8))
    chunks = chunk_iter(v)
    assert len(chunks) == -(-v.length // 128)
    bits = np.concatenate([c.bit_window for c in chunks])
    assert np.array_equal(bits[: v.length], v.bits) and not bits[v.length:].any()
    assert np.array_equal(np.concatenate([c.payload for c in chunks]), v.values)
    assert sum(c.payload.size for c in chunks) == v.nnz


def test_chunk_beats():
    x = np.ones(128, dtype=np.int8)
    assert chunk_iter(compress(x))[0].beats == 1 + 8
    assert chunk_iter(compress(np.zeros(128, dtype=np.int8)))[0].beats == 1


def test_inner_join_examples():
    m = inner_join("1100", "1010")
    assert m.indices.tolist() == [0] and m.a_offsets.tolist() == [0] and m.b_offsets.tolist() == [0]
    assert len(inner_join("1111", "0000")) == 0
    with pytest.raises(DimensionError):
        inner_join("11", "111")


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**128 - 1), st.integers(0, 2**128 - 1))
def test_inner_join_matches_scan(a_int, b_int):
    a = [(a_int >> i) & 1 for i in range(128)]
    b = [(b_int >> i) & 1 for i in range(128)]
    m = inner_join(a, b)
    idx, ao, bo = scan_join(a, b)
    assert m.indices.tolist() == idx
    assert m.a_offsets.tolist() == ao
    assert m.b_offsets.tolist() == bo
    assert match_count(a, b) == len(idx) == bin(a_int & b_int).count("1")


def test_prefix_offsets_examples():
    assert prefix_offsets("1011", [0, 2, 3]).tolist() == [0, 1, 2]
    assert prefix_offsets("1011", []).tolist() == []
    with pytest.raises(IndexError):
        prefix_offsets("1011", [4])


def test_prefix_offsets_random_512():
    rng = np.random.default_rng(3)
    bits = rng.random(512) < 0.4
    pos = np.sort(rng.choice(512, 60, replace=False))
    running, expected = 0, {}
    for k in range(512):
        expected[k] = running
        running += int(bits[k])
    assert prefix_offsets(bits, pos).tolist() == [expected[p] for p in pos]


def test_match_count_examples():
    assert match_count("1100", "1010") == 1
    rng = np.random.default_rng(1)
    x = rng.random(128) < 0.3
    assert match_count(x, x) == int(x.sum())
    with pytest.raises(DimensionError):
        match_count("1", "11")


def test_as_bits_forms():
    assert as_bits("101").tolist() == [True, False, True]
    assert as_bits([2, 0, -1]).tolist() == [True, False, True]


def test_matrix_layouts():
    rng = np.random.default_rng(5)
    dense = np.where(rng.random((6, 9)) < 0.5, rng.integers(-5, 6, (6, 9)), 0).astype(np.int8)
    rm = BitmapMatrix.from_dense(dense, ROW_MAJOR)
    cm = BitmapMatrix.from_dense(dense, COL_MAJOR)
    assert len(rm.fibers) == 6 and rm.fibers[0].length == 9
    assert len(cm.fibers) == 9 and cm.fibers[0].length == 6
    assert np.array_equal(rm.to_dense(), dense) and np.array_equal(cm.to_dense(), dense)
    assert np.array_equal(cm.bitmap(), dense != 0)
    with pytest.raises(StructuralError):
        BitmapMatrix(6, 9, rm.fibers[:5], ROW_MAJOR)


def test_file_header_layout():
    m = BitmapMatrix.from_dense(np.array([[3, 0, -2, 0, 0, 0, 0, 0, 0, 1]], dtype=np.int8))
    data = dumps_matrices([m])
    assert data[:4] == b"NFBM"
    # header 15 bytes, fiber length 4 bytes, then 2 bitmap bytes, bit 0 = position 0
    assert data[15:19] == (10).to_bytes(4, "little")
    assert data[19:21] == bytes([0b00000101, 0b00000010])
    assert np.frombuffer(data[21:], dtype=np.int8).tolist() == [3, -2, 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 300), st.sampled_from([ROW_MAJOR, COL_MAJOR]),
       st.integers(0, 2**32 - 1))
def test_file_roundtrip_bit_exact(rows, cols, layout, seed):
    rng = np.random.default_rng(seed)
    dense = np.where(rng.random((rows, cols)) < 0.3, rng.integers(-128, 128, (rows, cols)), 0)
    m = BitmapMatrix.from_dense(dense.astype(np.int8), layout)
    data = dumps_matrices([m, m])
    back = loads_matrices(data)
    assert back == [m, m]
    assert dumps_matrices(back) == data


def test_file_bad_magic(tmp_path):
    p = tmp_path / "x.nfbm"
    write_matrices(p, BitmapMatrix.from_dense(np.eye(3, dtype=np.int8)))
    raw = bytearray(p.read_bytes())
    assert read_matrices(p)[0].nnz == 3
    raw[:4] = b"XXXX"
    p.write_bytes(bytes(raw))
    with pytest.raises(StructuralError):
        read_matrices(p)
