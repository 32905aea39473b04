"""Run-length coding and the static canonical Huffman tables.

One table exists per packed width ``R``. Its symbols are every value
representable in ``R``-bit sign-magnitude, weighted by a zero-mean normal
density whose spread is fixed per width (17.4 at 7 bits, 35.7 at 8 bits,
doubling per extra bit elsewhere). Tables are pure functions of ``R``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

MIN_WIDTH = 2
MAX_WIDTH = 16
_SIGMA_FIXED = {7: 17.4, 8: 35.7}


def rle_encode(symbols: Sequence[int]) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    for s in symbols:
        if pairs and pairs[-1][0] == s:
            pairs[-1] = (s, pairs[-1][1] + 1)
        else:
            pairs.append((s, 1))
    return pairs


def rle_decode(pairs: Sequence[tuple[int, int]]) -> list[int]:
    out: list[int] = []
    for s, n in pairs:
        if n < 1:
            raise ValueError(f"run count must be positive, got {n}")
        out.extend([s] * n)
    return out


def gamma_code(n: int) -> tuple[int, int]:
    """Elias gamma code of ``n >= 1`` as ``(value, bit_length)``."""
    if n < 1:
        raise ValueError("gamma codes need n >= 1")
    return n, 2 * n.bit_length() - 1


def sigma(width: int) -> float:
    return _SIGMA_FIXED.get(width, 17.4 * 2.0 ** (width - 7))


def symbol_probabilities(width: int) -> np.ndarray:
    """Normal mass on ``[s - 0.5, s + 0.5]`` for ``s`` in the width's range, normalised."""
    top = (1 << (width - 1)) - 1
    scale = sigma(width) * math.sqrt(2.0)
    half = []
    for s in range(top + 1):
        if s == 0:
            half.append(math.erf(0.5 / scale))
        else:
            half.append(0.5 * (math.erfc((s - 0.5) / scale) - math.erfc((s + 0.5) / scale)))
    p = np.array(half[:0:-1] + half, dtype=np.float64)
    return p / p.sum()


@dataclass(frozen=True)
class HuffmanTable:
    """Canonical code for symbols ``-(2**(R-1)-1) .. 2**(R-1)-1``.

    ``codes``/``lengths`` are indexed by ``symbol + offset``; the remaining
    arrays drive canonical decoding.
    """

    width: int
    offset: int
    codes: np.ndarray
    lengths: np.ndarray
    first_code: np.ndarray
    counts: np.ndarray
    first_index: np.ndarray
    symbols: np.ndarray

    def code(self, symbol: int) -> str:
        i = symbol + self.offset
        return format(int(self.codes[i]), f"0{int(self.lengths[i])}b")

    def kraft_sum(self) -> Fraction:
        return sum((Fraction(1, 1 << int(l)) for l in self.lengths), Fraction(0))


def _code_lengths(p: np.ndarray) -> np.ndarray:
    n = len(p)
    parent = np.zeros(2 * n - 1, dtype=np.int64)
    heap = [(float(prob), i) for i, prob in enumerate(p)]
    heapq.heapify(heap)
    nxt = n
    while len(heap) > 1:
        pa, a = heapq.heappop(heap)
        pb, b = heapq.heappop(heap)
        parent[a] = parent[b] = nxt
        heapq.heappush(heap, (pa + pb, nxt))
        nxt += 1
    root = nxt - 1
    depth = np.zeros(2 * n - 1, dtype=np.int64)
    # internal nodes are created after their children, so walk ids downwards
    for node in range(root - 1, -1, -1):
        depth[node] = depth[parent[node]] + 1
    return depth[:n]


@lru_cache(maxsize=None)
def huffman_table(width: int) -> HuffmanTable:
    if not MIN_WIDTH <= width <= MAX_WIDTH:
        raise ValueError(f"Huffman tables exist for widths {MIN_WIDTH}..{MAX_WIDTH}, not {width}")
    p = symbol_probabilities(width)
    lengths = _code_lengths(p)
    max_len = int(lengths.max())
    if max_len > 64:
        raise ValueError(f"code length {max_len} exceeds 64 bits")
    order = np.lexsort((np.arange(len(p)), lengths))
    codes = np.zeros(len(p), dtype=np.uint64)
    counts = np.bincount(lengths, minlength=max_len + 1).astype(np.int64)
    first_code = np.zeros(max_len + 1, dtype=np.uint64)
    first_index = np.zeros(max_len + 1, dtype=np.int64)
    code = 0
    for l in range(1, max_len + 1):
        code = (code + int(counts[l - 1])) << 1 if l > 1 else 0
        first_code[l] = code
        first_index[l] = first_index[l - 1] + counts[l - 1] if l > 1 else 0
    cursor = first_code.astype(object).copy()
    for i in order.tolist():
        l = int(lengths[i])
        codes[i] = cursor[l]
        cursor[l] += 1
    offset = (1 << (width - 1)) - 1
    symbols = (order - offset).astype(np.int64)
    for arr in (codes, lengths, first_code, counts, first_index, symbols):
        arr.setflags(write=False)
    return HuffmanTable(width, offset, codes, lengths.astype(np.uint8), first_code,
                        counts, first_index, symbols)
