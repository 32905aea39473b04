import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcarray import hmmt
from qcarray.bitstream import BitReader
from qcarray.geometry import GeometryError, make_schema, pad_array
from qcarray.hmmt import (
    HmmtFormatError,
    HmmtTopology,
    _value_range,
    bit_width,
    build,
    compress,
    decompress,
    exact_size_bits,
    sig_bit_pos,
    signed_sig_bit,
)

from conftest import VALUE_TYPES, random_values


def test_sig_bit_pos_examples():
    assert [sig_bit_pos(n, 102) for n in (1, 2, 4)] == [7, 6, 2]
    assert sig_bit_pos(4, 100) == 0
    assert all(sig_bit_pos(n, 0) == 0 for n in range(1, 10))
    assert bit_width(0) == 0 and bit_width(13) == 4


def test_signed_sig_bit_examples():
    assert signed_sig_bit(1, -32) == -6
    assert signed_sig_bit(1, 102) == 7
    assert signed_sig_bit(1, 0) == 0
    assert signed_sig_bit(2, -96) == -6


@given(st.integers(0, 2**40), st.integers(1, 45))
def test_sig_bit_pos_matches_bit_enumeration(x, n):
    ones = [i + 1 for i in range(x.bit_length()) if x >> i & 1][::-1]
    assert sig_bit_pos(n, x) == (ones[n - 1] if n <= len(ones) else 0)


def test_quadtree_shape_sixteen_blocks():
    topo = HmmtTopology.from_schema(make_schema((8, 8), (8, 8), 2, "uint8"))
    assert topo.grids == ((1, 1), (2, 2), (4, 4))
    assert topo.chunk_level == 0 and topo.block_level == 2
    assert topo.children((0, 0)) == [(1, 0), (1, 1), (1, 2), (1, 3)]
    assert topo.children((1, 0))[1] == (2, 1)
    for node in topo.iter_bfs():
        for c in topo.children(node):
            assert topo.parent(c) == node
    with pytest.raises(GeometryError):
        topo.parent((0, 0))
    with pytest.raises(GeometryError):
        topo.children((3, 0))


def test_topology_groups_into_root_when_a_dimension_runs_out():
    topo = HmmtTopology.from_schema(make_schema((8, 48), (8, 8), 1, "uint8"))
    assert topo.grids == ((1, 1), (1, 6), (2, 12))
    assert len(topo.children((0, 0))) == 6
    # odd grid: ceil halving leaves the last parent with the leftover leaf only
    topo = HmmtTopology.from_schema(make_schema((24, 24), (8, 8), 0, "uint8"))
    assert topo.grids == ((1, 1), (2, 2), (3, 3))
    assert len(topo.children((1, 0))) == 4
    assert topo.children((1, 3)) == [(2, 8)]
    assert topo.parent((2, 8)) == (1, 3)


def fragment_minmax(tree, node):
    """Brute force: walk down to the leaves below ``node`` and scan them."""
    topo = tree.topology
    stack, leaves = [node], []
    while stack:
        n = stack.pop()
        kids = topo.children(n)
        if kids:
            stack.extend(kids)
        else:
            leaves.append(n)
    return min(tree.node(l)[0] for l in leaves), max(tree.node(l)[1] for l in leaves)


def leaf_scan(padded, schema, topo, leaf):
    coords = np.unravel_index(leaf[1], topo.grids[leaf[0]])
    sl = tuple(slice(c * b, (c + 1) * b) for c, b in zip(coords, schema.block_dims))
    return int(padded[sl].min()), int(padded[sl].max())


def test_build_matches_fragment_scan(rng):
    for _ in range(30):
        m = int(rng.integers(1, 4))
        level = int(rng.integers(0, 3))
        chunk = [int(rng.choice([1, 2])) << level for _ in range(m)]
        shape = [int(rng.integers(1, 5)) * c for c in chunk]
        vt = str(rng.choice(VALUE_TYPES))
        s = make_schema(shape, chunk, level, vt)
        x = pad_array(random_values(rng, shape, vt), s)
        topo, tree = build(x, s)
        for node in topo.iter_bfs():
            if topo.children(node):
                assert tree.node(node) == fragment_minmax(tree, node)
            else:
                assert tree.node(node) == leaf_scan(x, s, topo, node)


def test_constant_array():
    s = make_schema((16, 16), (8, 8), 1, "int16")
    x = np.full((16, 16), -77, np.int16)
    topo, tree = build(x, s)
    assert all(tree.node(n) == (-77, -77) for n in topo.iter_bfs())
    data, nbits = compress(tree)
    b = decompress(data, topo, "int16", nbits)
    assert all(b.bounds(n) == (-77, -77) for n in topo.iter_bfs())


def two_leaf_tree():
    s = make_schema((4,), (4,), 1, "int8")
    x = np.array([-32, 0, 100, 102], np.int8)
    return s, *build(x, s)


def test_jump_stream_for_close_min_max():
    s, topo, tree = two_leaf_tree()
    assert tree.node((0, 0)) == (-32, 102)
    data, nbits = compress(tree)
    r = BitReader(data, 0, nbits)
    assert r.read_unsigned(8) == (-32) & 0xFF and r.read_unsigned(8) == 102
    # first leaf: deltas against the root's S_1 values at width W(7 - (-6))
    assert [r.read_unsigned(4), r.read_unsigned(4)] == [0, 7]
    # second leaf (100, 102): both S_1 = 7
    assert [r.read_unsigned(4), r.read_unsigned(4)] == [13, 0]
    assert r.read_unsigned(7) == 3          # order 1 -> 4
    assert [r.read_bit() for _ in range(4)] == [1, 0, 0, 1]
    assert r.read_bit() == 1                # end bit
    assert r.remaining == 0
    b = decompress(data, topo, "int8", nbits)
    assert b.root == (-32, 102)
    assert b.bounds((1, 1)) == (100, 102)


def test_bounds_from_one_known_bit():
    assert _value_range(7, 1, 0, 1) == (64, 127)
    assert _value_range(-6, 1, 0, 1) == (-63, -32)


def test_single_node_tree():
    s = make_schema((4, 4), (4, 4), 0, "uint8")
    x = np.arange(16, dtype=np.uint8).reshape(4, 4) * 6 + 3
    topo, tree = build(x, s)
    assert topo.node_count == 1
    data, nbits = compress(tree)
    assert nbits == 16 and data == bytes([3, 93])
    assert decompress(data, topo, "uint8", nbits).root == (3, 93)


def test_soundness_random(rng):
    for i in range(300):
        m = int(rng.integers(1, 4))
        level = int(rng.integers(0, 3))
        chunk = [int(rng.choice([1, 2, 4])) << level for _ in range(m)]
        shape = [int(rng.integers(1, 4)) * c for c in chunk]
        vt = VALUE_TYPES[i % len(VALUE_TYPES)]
        s = make_schema(shape, chunk, level, vt)
        spread = [None, 3, 40][i % 3]
        x = pad_array(random_values(rng, shape, vt, spread), s)
        topo, tree = build(x, s)
        data, nbits = compress(tree)
        b = decompress(data, topo, vt, nbits)
        assert b.root == tree.node((0, 0))
        for node in topo.iter_bfs():
            lo, hi = b.bounds(node)
            mn, mx = tree.node(node)
            assert lo <= mn <= mx <= hi


def test_compressed_smaller_than_exact():
    from conftest import smooth_field

    x = smooth_field(256)
    s = make_schema(x.shape, (64, 64), 3, "uint8")
    topo, tree = build(x, s)
    _, nbits = compress(tree)
    assert nbits < exact_size_bits(tree)


def test_corrupt_streams_raise(rng):
    s = make_schema((32, 32), (8, 8), 2, "int16")
    x = random_values(rng, (32, 32), "int16", 50)
    topo, tree = build(x, s)
    data, nbits = compress(tree)
    with pytest.raises(HmmtFormatError):
        decompress(data[: len(data) // 2], topo, "int16", nbits)
    with pytest.raises(HmmtFormatError):
        decompress(data + b"\x00", topo, "int16", nbits + 8)
    with pytest.raises(HmmtFormatError):
        # root min > root max
        decompress(bytes([0x7F, 0xFF, 0x00, 0x00]) + data[4:], topo, "int16", nbits)


def test_navigation():
    s, topo, tree = two_leaf_tree()
    data, nbits = compress(tree)
    b = decompress(data, topo, "int8", nbits)
    assert b.children((0, 0)) == [(1, 0), (1, 1)]
    assert b.parent((1, 1)) == (0, 0)
    with pytest.raises(GeometryError):
        b.bounds((1, 2))
