"""Hierarchical min-max tree: build, significant-bit compression, decoding.

Leaves summarise blocks; each level above merges two neighbours per
dimension until some dimension has a single node left, at which point the
remaining nodes are grouped under the root. Node ids are ``(level, index)``
with level 0 the root and indices row-major within a level.

Compression keeps exact values only at the root. Every other node stores
the ``order``-th significant bit of its min and max (``S_n``), either as a
delta against its parent or fresh after the order advanced. Whenever a
node's min and max agree on their current significant bit, the bits they
share are emitted once as a *jump* and the order for its children moves
past them. Decoding yields conservative ``[lower, upper]`` bounds per node.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from math import prod
from typing import Iterator

import numpy as np

from .bitstream import BitReader, BitstreamError, BitWriter
from .geometry import ArraySchema, GeometryError, delinearize, linearize, value_dtype

NodeId = tuple[int, int]


class HmmtFormatError(ValueError):
    """The tree bit stream is truncated or desynchronised."""


# --- significant bits ---------------------------------------------------------

def sig_bit_pos(n: int, x: int) -> int:
    """1-based position of the ``n``-th most significant set bit of ``x``; 0 if absent."""
    if n < 1 or x < 0:
        raise ValueError("sig_bit_pos needs n >= 1 and x >= 0")
    for _ in range(n - 1):
        if not x:
            return 0
        x ^= 1 << (x.bit_length() - 1)
    return x.bit_length()


def signed_sig_bit(n: int, x: int) -> int:
    """``sign(x) * sig_bit_pos(n, |x|)`` with ``sign(0) = +1``."""
    pos = sig_bit_pos(n, abs(x))
    return -pos if x < 0 else pos


def bit_width(x: int) -> int:
    """Bits needed for a non-negative ``x`` (position of its top set bit)."""
    return int(x).bit_length()


# --- topology -----------------------------------------------------------------

@dataclass(frozen=True)
class HmmtTopology:
    grids: tuple[tuple[int, ...], ...]
    chunk_level: int
    block_level: int

    @classmethod
    def from_schema(cls, schema: ArraySchema) -> "HmmtTopology":
        L = schema.wavelet_level
        leaf = tuple(g << L for g in schema.chunk_grid)
        grids = [leaf]
        while prod(grids[-1]) > 1:
            g = grids[-1]
            if all(x >= 2 for x in g):
                grids.append(tuple((x + 1) // 2 for x in g))
            else:
                grids.append((1,) * len(g))
        grids.reverse()
        block_level = len(grids) - 1
        return cls(tuple(grids), block_level - L, block_level)

    @property
    def ndim(self) -> int:
        return len(self.grids[0])

    @property
    def levels(self) -> int:
        return len(self.grids)

    @property
    def node_count(self) -> int:
        return sum(prod(g) for g in self.grids)

    def level_size(self, level: int) -> int:
        return prod(self.grids[level])

    def _check(self, node: NodeId) -> None:
        lv, k = node
        if not (0 <= lv < self.levels and 0 <= k < self.level_size(lv)):
            raise GeometryError(f"invalid node id {node}")

    def parent(self, node: NodeId) -> NodeId:
        self._check(node)
        lv, k = node
        if lv == 0:
            raise GeometryError("the root has no parent")
        up = self.grids[lv - 1]
        c = delinearize(k, self.grids[lv])
        return (lv - 1, linearize(tuple(min(x >> 1, u - 1) for x, u in zip(c, up)), up))

    def children(self, node: NodeId) -> list[NodeId]:
        self._check(node)
        lv, k = node
        if lv == self.block_level:
            return []
        up, down = self.grids[lv], self.grids[lv + 1]
        c = delinearize(k, up)
        ranges = []
        for x, u, g in zip(c, up, down):
            ranges.append(range(g) if u == 1 else range(2 * x, min(2 * x + 2, g)))
        return [(lv + 1, linearize(cc, down)) for cc in product(*ranges)]

    def chunk_node(self, chunk_id: int, chunk_grid) -> NodeId:
        return (self.chunk_level, linearize(delinearize(chunk_id, chunk_grid), self.grids[self.chunk_level]))

    def iter_bfs(self) -> Iterator[NodeId]:
        queue = deque([(0, 0)])
        while queue:
            node = queue.popleft()
            yield node
            queue.extend(self.children(node))


@dataclass
class HmmtTree:
    """Exact per-node min/max, one flat row-major array per level."""

    topology: HmmtTopology
    mins: list[np.ndarray]
    maxs: list[np.ndarray]
    value_type: str

    def node(self, node: NodeId) -> tuple[int, int]:
        lv, k = node
        return int(self.mins[lv][k]), int(self.maxs[lv][k])


def build(padded: np.ndarray, schema: ArraySchema) -> tuple[HmmtTopology, HmmtTree]:
    if tuple(padded.shape) != tuple(schema.dims):
        raise GeometryError(f"array shape {padded.shape} does not match schema dims {schema.dims}")
    topo = HmmtTopology.from_schema(schema)
    m = schema.ndim
    leaf_grid = topo.grids[topo.block_level]
    shaped = np.asarray(padded, dtype=np.int64).reshape(
        tuple(x for g, b in zip(leaf_grid, schema.block_dims) for x in (g, b)))
    cell_axes = tuple(range(1, 2 * m, 2))
    mins = [shaped.min(axis=cell_axes)]
    maxs = [shaped.max(axis=cell_axes)]
    for lv in range(topo.block_level - 1, -1, -1):
        up = topo.grids[lv]
        lo, hi = mins[-1], maxs[-1]
        if all(u == 1 for u in up):
            mins.append(lo.min().reshape(up))
            maxs.append(hi.max().reshape(up))
            continue
        pad = [(0, 2 * u - g) for u, g in zip(up, lo.shape)]
        lo = np.pad(lo, pad, mode="edge")
        hi = np.pad(hi, pad, mode="edge")
        pairs = tuple(x for u in up for x in (u, 2))
        mins.append(lo.reshape(pairs).min(axis=cell_axes))
        maxs.append(hi.reshape(pairs).max(axis=cell_axes))
    mins.reverse()
    maxs.reverse()
    tree = HmmtTree(topo, [a.reshape(-1) for a in mins], [a.reshape(-1) for a in maxs], schema.value_type)
    return topo, tree


# --- compression --------------------------------------------------------------

def root_width(value_type: str) -> int:
    return 8 * value_dtype(value_type).itemsize


def _signed_type(value_type: str) -> bool:
    return not value_type.startswith("u")


def compress(tree: HmmtTree) -> tuple[bytes, int]:
    """Encode the tree breadth-first; returns ``(bytes, bit_length)``."""
    topo = tree.topology
    mins = [a.tolist() for a in tree.mins]
    maxs = [a.tolist() for a in tree.maxs]
    out = BitWriter()
    rw = root_width(tree.value_type)
    mask = (1 << rw) - 1
    order: dict[NodeId, int] = {(0, 0): 1}
    width: dict[NodeId, int] = {(0, 0): rw}
    queue = deque([(0, 0)])
    while queue:
        node = queue.popleft()
        lv, k = node
        mn, mx = mins[lv][k], maxs[lv][k]
        n, w = order[node], width[node]
        s_min, s_max = signed_sig_bit(n, mn), signed_sig_bit(n, mx)

        out.set_width(w)
        if lv == 0:
            out << (mn & mask) << (mx & mask)
        else:
            p = topo.parent(node)
            if order[p] == n:
                d_min = s_min - signed_sig_bit(n, mins[p[0]][p[1]])
                d_max = signed_sig_bit(n, maxs[p[0]][p[1]]) - s_max
                out << d_min << d_max
            else:
                out << abs(s_min) << abs(s_max)

        children = topo.children(node)
        finished = False
        if s_min == 0 and s_max == 0:
            finished = True
        elif s_min != s_max:
            for c in children:
                order[c] = n
                width[c] = bit_width(s_max - s_min)
        else:
            a_min, a_max = abs(mn), abs(mx)
            start = abs(s_max)
            nxt = n
            while sig_bit_pos(nxt, a_min) == sig_bit_pos(nxt, a_max) != 0:
                nxt += 1
            if sig_bit_pos(nxt, a_min) == 0 and sig_bit_pos(nxt, a_max) == 0:
                # min == max: all remaining bits go into the jump
                out.write_unsigned(0, start)
                out.write_bits(a_min & ((1 << (start - 1)) - 1), start - 1)
                finished = True
            else:
                last = sig_bit_pos(nxt - 1, a_min)
                out.write_unsigned(nxt - n, start)
                out.write_bits((a_min >> (last - 1)) & ((1 << (start - last)) - 1), start - last)
                for c in children:
                    order[c] = nxt
                    width[c] = bit_width(last - 1)
            out.write_unsigned(1, 1)
        if not finished:
            queue.extend(children)
    return out.getvalue(), out.bit_length


# --- decoding -----------------------------------------------------------------

@dataclass
class DecodedBounds:
    """Conservative per-node bounds; ``lower <= true min <= true max <= upper``."""

    topology: HmmtTopology
    lower: list[np.ndarray]
    upper: list[np.ndarray]

    def bounds(self, node: NodeId) -> tuple[int, int]:
        self.topology._check(node)
        lv, k = node
        return int(self.lower[lv][k]), int(self.upper[lv][k])

    def parent(self, node: NodeId) -> NodeId:
        return self.topology.parent(node)

    def children(self, node: NodeId) -> list[NodeId]:
        return self.topology.children(node)

    @property
    def root(self) -> tuple[int, int]:
        return self.bounds((0, 0))


def _value_range(s: int, n: int, prefix: int, sign: int) -> tuple[int, int]:
    """All values whose order-``n`` significant bit is ``s`` given the known prefix."""
    k = abs(s)
    if n == 1:
        sign = -1 if s < 0 else 1
    lo_mag = prefix + (1 << (k - 1)) if k else prefix
    hi_mag = prefix + (1 << k) - 1 if k else prefix
    return (lo_mag, hi_mag) if sign > 0 else (-hi_mag, -lo_mag)


def decompress(data: bytes, topology: HmmtTopology, value_type: str,
               bit_length: int | None = None) -> DecodedBounds:
    try:
        reader = BitReader(data, 0, bit_length)
        bounds = _decode(reader, topology, value_type)
    except BitstreamError as exc:
        raise HmmtFormatError(f"truncated tree stream: {exc}") from None
    if reader.remaining:
        raise HmmtFormatError(f"{reader.remaining} unread bits after tree stream")
    return bounds


def _decode(reader: BitReader, topo: HmmtTopology, value_type: str) -> DecodedBounds:
    lower = [np.zeros(topo.level_size(lv), dtype=np.int64) for lv in range(topo.levels)]
    upper = [np.zeros(topo.level_size(lv), dtype=np.int64) for lv in range(topo.levels)]
    visited = [np.zeros(topo.level_size(lv), dtype=bool) for lv in range(topo.levels)]
    rw = root_width(value_type)
    # per node: (order, width, s_min, s_max, prefix, sign)
    state: dict[NodeId, list] = {(0, 0): [1, rw, 0, 0, 0, 1]}
    queue = deque([(0, 0)])
    while queue:
        node = queue.popleft()
        lv, k = node
        st = state.pop(node)
        n, w, _, _, prefix, sign = st
        if lv == 0:
            mn = reader.read_unsigned(rw)
            mx = reader.read_unsigned(rw)
            if _signed_type(value_type):
                mn -= (mn >> (rw - 1)) << rw
                mx -= (mx >> (rw - 1)) << rw
            if mn > mx:
                raise HmmtFormatError("root min exceeds root max")
            lo, hi = mn, mx
            s_min, s_max = signed_sig_bit(1, mn), signed_sig_bit(1, mx)
        else:
            a = reader.read_unsigned(w)
            b = reader.read_unsigned(w)
            if st[2] is None:
                s_min, s_max = sign * a, sign * b
            else:
                s_min, s_max = st[2] + a, st[3] - b
            if s_min > s_max:
                raise HmmtFormatError(f"node {node}: decoded significant bits out of order")
            lo = _value_range(s_min, n, prefix, sign)[0]
            hi = _value_range(s_max, n, prefix, sign)[1]
            p = topo.parent(node)
            lo = max(lo, int(lower[p[0]][p[1]]))
            hi = min(hi, int(upper[p[0]][p[1]]))
            if lo > hi:
                raise HmmtFormatError(f"node {node}: empty bound interval")

        children = topo.children(node)
        finished = False
        if s_min == 0 and s_max == 0:
            finished = True
        elif s_min != s_max:
            for c in children:
                state[c] = [n, bit_width(s_max - s_min), s_min, s_max, prefix, sign]
        else:
            start = abs(s_max)
            sgn = -1 if s_max < 0 else 1
            base = prefix + (1 << (start - 1))
            step = reader.read_unsigned(start)
            if step == 0:
                exact = sgn * (base + reader.read_bits(start - 1))
                lo, hi = max(lo, exact), min(hi, exact)
                finished = True
            else:
                ones, pos, last, bits = 0, start - 1, start, 0
                while ones < step - 1:
                    if pos < 1:
                        raise HmmtFormatError(f"node {node}: jump runs past bit 1")
                    if reader.read_bit():
                        bits |= 1 << (pos - 1)
                        ones += 1
                        last = pos
                    pos -= 1
                if last < 2:
                    raise HmmtFormatError(f"node {node}: jump leaves no room for further bits")
                new_prefix = base + bits
                span = (new_prefix, new_prefix + (1 << (last - 1)) - 1)
                span = span if sgn > 0 else (-span[1], -span[0])
                lo, hi = max(lo, span[0]), min(hi, span[1])
                for c in children:
                    state[c] = [n + step, bit_width(last - 1), None, None, new_prefix, sgn]
            if reader.read_bit() != 1:
                raise HmmtFormatError(f"node {node}: missing jump end bit")
            if lo > hi:
                raise HmmtFormatError(f"node {node}: empty bound interval")
        lower[lv][k], upper[lv][k] = lo, hi
        visited[lv][k] = True
        if not finished:
            queue.extend(children)
        else:
            for c in children:
                state.pop(c, None)

    for lv in range(1, topo.levels):
        todo = np.flatnonzero(~visited[lv])
        for k in todo.tolist():
            p = topo.parent((lv, k))
            lower[lv][k] = lower[p[0]][p[1]]
            upper[lv][k] = upper[p[0]][p[1]]
    return DecodedBounds(topo, lower, upper)


def exact_size_bits(tree: HmmtTree) -> int:
    """Size of the tree with every min/max stored at full width."""
    return 2 * root_width(tree.value_type) * tree.topology.node_count
