import heapq
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from qcarray.entropy import (
    MAX_WIDTH,
    MIN_WIDTH,
    gamma_code,
    huffman_table,
    rle_decode,
    rle_encode,
    sigma,
    symbol_probabilities,
)

WIDTHS = range(MIN_WIDTH, MAX_WIDTH + 1)


def test_rle_examples():
    assert rle_encode([7, 7, 7, 2]) == [(7, 3), (2, 1)]
    assert rle_encode([1, 2, 3]) == [(1, 1), (2, 1), (3, 1)]
    assert rle_encode([]) == []
    with pytest.raises(ValueError):
        rle_decode([(1, 0)])


def test_rle_fuzz(rng):
    for _ in range(10_000):
        n = int(rng.integers(0, 40))
        seq = rng.integers(-3, 4, n).tolist()
        pairs = rle_encode(seq)
        assert rle_decode(pairs) == seq
        assert all(c >= 1 for _, c in pairs)
        assert all(a[0] != b[0] for a, b in zip(pairs, pairs[1:]))


def test_gamma_code():
    assert gamma_code(1) == (1, 1)
    assert gamma_code(5) == (5, 5)        # 00101
    with pytest.raises(ValueError):
        gamma_code(0)


def test_sigma_values():
    assert sigma(7) == 17.4
    assert sigma(8) == 35.7
    assert sigma(9) == pytest.approx(17.4 * 4)
    assert sigma(2) == pytest.approx(17.4 / 32)


@pytest.mark.parametrize("width", [2, 5, 7, 8, 12])
def test_probabilities_match_normal_cdf(width):
    top = (1 << (width - 1)) - 1
    s = np.arange(-top, top + 1)
    ref = norm.cdf(s + 0.5, scale=sigma(width)) - norm.cdf(s - 0.5, scale=sigma(width))
    np.testing.assert_allclose(symbol_probabilities(width), ref / ref.sum(), rtol=1e-9, atol=1e-300)


def optimal_cost(p):
    heap = list(p)
    heapq.heapify(heap)
    cost = 0.0
    while len(heap) > 1:
        a, b = heapq.heappop(heap), heapq.heappop(heap)
        cost += a + b
        heapq.heappush(heap, a + b)
    return cost


@pytest.mark.parametrize("width", WIDTHS)
def test_table_properties(width):
    t = huffman_table(width)
    assert t.kraft_sum() == Fraction(1)
    n = (1 << width) - 1
    assert len(t.codes) == n
    lengths = t.lengths.astype(int)
    assert lengths[t.offset] == lengths.min()      # zero gets a shortest code
    if width <= 12:
        words = sorted(t.code(s) for s in range(-t.offset, t.offset + 1))
        assert all(not b.startswith(a) for a, b in zip(words, words[1:]))
    p = symbol_probabilities(width)
    assert float((p * lengths).sum()) == pytest.approx(optimal_cost(p), rel=1e-9)


def test_table_is_canonical_and_cached():
    t = huffman_table(2)
    assert (t.code(0), t.code(-1), t.code(1)) == ("0", "10", "11")
    assert huffman_table(7) is huffman_table(7)
    with pytest.raises(ValueError):
        huffman_table(1)
    with pytest.raises(ValueError):
        huffman_table(MAX_WIDTH + 1)


@given(st.integers(MIN_WIDTH, 10))
def test_table_deterministic(width):
    a, b = huffman_table(width), huffman_table.__wrapped__(width)
    assert (a.codes == b.codes).all() and (a.lengths == b.lengths).all()
