import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcarray.geometry import (
    ArraySchema,
    GeometryError,
    Region,
    cell_of,
    chunks_in_region,
    crop_array,
    delinearize,
    join_blocks,
    join_chunks,
    linearize,
    locate,
    make_schema,
    pad_array,
    split_blocks,
    split_chunks,
)


def test_make_schema_common_setting():
    s = make_schema((1024, 1024), (64, 64), 3, "uint8")
    assert s.dims == (1024, 1024)
    assert s.block_dims == (8, 8)
    assert s.blocks_per_chunk == 64


def test_make_schema_sixteen_blocks():
    s = make_schema((8, 8), (8, 8), 2, "uint8")
    assert s.block_dims == (2, 2)
    assert s.blocks_per_chunk == 16


def test_make_schema_pads_and_level_zero():
    s = make_schema((100, 100), (64, 64), 0, "int16")
    assert s.dims == (128, 128)
    assert s.block_dims == (64, 64)
    assert s.num_chunks == 4


@pytest.mark.parametrize("args", [
    ((8, 8), (6, 8), 2, "uint8"),     # 6 not divisible by 4
    ((0, 8), (8, 8), 1, "uint8"),
    ((8,), (8, 8), 1, "uint8"),
    ((8, 8), (8, 8), -1, "uint8"),
    ((8, 8), (8, 8), 1, "float32"),
])
def test_make_schema_rejects(args):
    with pytest.raises(GeometryError):
        make_schema(*args)


def test_schema_invariants_enforced():
    with pytest.raises(GeometryError):
        ArraySchema((16,), (8,), 0, "uint8", (4,))  # padding beyond one chunk


def test_linearize_examples():
    assert linearize((0, 0), (2, 2)) == 0
    assert linearize((1, 0), (4, 4)) == 4
    # chunk grid 2x2 of an 8x8 array: chunk below chunk 0 is chunk 2
    assert linearize((1, 0), (2, 2)) == 2
    with pytest.raises(GeometryError):
        linearize((2, 0), (2, 2))


def test_linearize_round_trip_exhaustive():
    ext = (3, 4, 5)
    seen = [linearize(delinearize(i, ext), ext) for i in range(60)]
    assert seen == list(range(60))
    assert delinearize(1, ext) == (0, 0, 1)


def test_locate_examples():
    s = make_schema((8, 8), (4, 4), 1, "uint8")
    assert locate((0, 0), s) == (0, 0, (0, 0))
    # row 5, column 2: chunk (1,0), local (1,2), block (0,1), offset (1,0)
    assert locate((5, 2), s) == (2, 1, (1, 0))
    with pytest.raises(GeometryError):
        locate((8, 0), s)


def test_locate_inverse_random(rng):
    s = make_schema((37, 50, 9), (8, 16, 4), 2, "int16")
    for _ in range(1000):
        cell = tuple(int(rng.integers(0, n)) for n in s.dims)
        assert cell_of(*locate(cell, s), s) == cell


def test_pad_and_crop():
    s = make_schema((3, 3), (4, 4), 1, "uint8")
    x = np.arange(1, 10, dtype=np.uint8).reshape(3, 3)
    p = pad_array(x, s)
    assert p.shape == (4, 4)
    assert int((p == 0).sum()) == 7
    assert (crop_array(p, s) == x).all()
    with pytest.raises(GeometryError):
        pad_array(np.zeros(8), s)
    s2 = make_schema((4, 4), (4, 4), 1, "uint8")
    y = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert (pad_array(y, s2) == y).all()


def test_region_parse_and_intersect():
    r = Region.parse("0:64, 10:20")
    assert r.lo == (0, 10) and r.hi == (64, 20)
    assert str(r) == "0:64,10:20"
    assert r.intersect(Region((60, 0), (70, 15))) == Region((60, 10), (64, 15))
    assert r.intersect(Region((64, 0), (70, 15))) is None
    for bad in ("0-4", "a:b", "1:2:3"):
        with pytest.raises(GeometryError):
            Region.parse(bad)
    with pytest.raises(GeometryError):
        Region((5,), (4,))


def test_chunks_in_region():
    s = make_schema((256, 256), (64, 64), 3, "uint8")
    assert chunks_in_region(Region((0, 0), (64, 128)), s) == [0, 1]
    assert chunks_in_region(Region((63, 63), (65, 65)), s) == [0, 1, 4, 5]


@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2), st.data())
def test_split_join_round_trip(grid, level, data):
    block = [data.draw(st.integers(1, 3)) for _ in grid]
    chunk = [b << level for b in block]
    s = make_schema([g * c for g, c in zip(grid, chunk)], chunk, level, "int32")
    x = np.arange(np.prod(s.dims)).reshape(s.dims)
    chunks = split_chunks(x, s)
    assert chunks.shape == (s.num_chunks,) + s.chunk_dims
    assert (join_chunks(chunks, s) == x).all()
    for c in range(s.num_chunks):
        assert (chunks[c] == x[s.chunk_region(c).slices()]).all()
        blocks = split_blocks(chunks[c], s)
        assert (join_blocks(blocks, s) == chunks[c]).all()
        b = data.draw(st.integers(0, s.blocks_per_chunk - 1))
        assert (blocks[b] == x[s.block_region(c, b).slices()].reshape(-1)).all()
