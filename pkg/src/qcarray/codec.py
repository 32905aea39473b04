"""Per-chunk bit-packing with tree-estimated widths, plus optional RLE/Huffman.

Chunk byte layout (bits, MSB first):

* ``blocks_per_chunk`` x 7-bit two's-complement width differentials
  (``estimated - real``), in block order;
* with bit-reduction only: a 6-bit field width ``W`` followed by a
  ``W``-bit payload length for every entropy-coded block;
* block payloads back to back, synopsis block first;
* zero padding to a byte boundary.

A block is entropy coded iff bit-reduction is on and its real width is in
``[2, 16]``; otherwise its payload is ``cells * width`` sign-magnitude bits.
Both sides derive every width from the decoded tree bounds, so the layout
is fully determined by the header fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .bitstream import BitReader, BitstreamError, BitWriter
from .entropy import MAX_WIDTH as HUFFMAN_MAX_WIDTH
from .entropy import MIN_WIDTH as HUFFMAN_MIN_WIDTH
from .entropy import huffman_table
from .geometry import ArraySchema, join_blocks, split_blocks
from .hmmt import DecodedBounds
from .wavelet import BlockNodeMap

DELTA_BITS = 7
LENGTH_WIDTH_BITS = 6
MAX_PACK_WIDTH = 64


class ChunkFormatError(ValueError):
    """Corrupt or inconsistent chunk data."""


def r_real(values) -> int:
    """Sign-magnitude width of a block; an all-zero block needs no bits."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        return 0
    peak = int(np.abs(v).max())
    return peak.bit_length() + 1 if peak else 0


def r_est_synopsis(lower: int, upper: int) -> int:
    return max(abs(lower).bit_length(), abs(upper).bit_length()) + 1


def r_est_detail(lower: int, upper: int, level: int) -> int:
    return max(max(abs(lower).bit_length(), abs(upper).bit_length()) + 1 - level, 0)


def estimate_widths(node_map: BlockNodeMap, bounds: DecodedBounds) -> list[int]:
    widths = []
    for lv, node in zip(node_map.levels, node_map.nodes):
        lo, hi = bounds.bounds(node)
        widths.append(r_est_synopsis(lo, hi) if lv == 0 else r_est_detail(lo, hi, lv))
    return widths


def entropy_coded(width: int, bit_reduction: bool) -> bool:
    return bit_reduction and HUFFMAN_MIN_WIDTH <= width <= HUFFMAN_MAX_WIDTH


@dataclass
class ChunkLayout:
    widths: list[int]
    offsets: list[int]
    nbits: list[int]
    end: int

    def block_bytes_end(self, block_id: int) -> int:
        return (self.offsets[block_id] + self.nbits[block_id] + 7) >> 3


@dataclass
class CompressedChunk:
    """One encoded chunk; ``data`` is exactly its on-disk bytes."""

    chunk_id: int
    data: bytes
    blocks_per_chunk: int
    cells_per_block: int
    bit_reduction: bool
    _deltas: list[int] | None = field(default=None, repr=False)

    @property
    def deltas(self) -> list[int]:
        if self._deltas is None:
            reader = BitReader(self.data)
            try:
                raw = [reader.read_unsigned(DELTA_BITS) for _ in range(self.blocks_per_chunk)]
            except BitstreamError:
                raise ChunkFormatError(f"chunk {self.chunk_id}: truncated header") from None
            half = 1 << (DELTA_BITS - 1)
            self._deltas = [r - (1 << DELTA_BITS) if r >= half else r for r in raw]
        return self._deltas

    @property
    def header_bits_min(self) -> int:
        return self.blocks_per_chunk * DELTA_BITS

    def layout(self, r_est: Sequence[int], partial: bool = False) -> ChunkLayout:
        """Resolve real widths and payload offsets; ``partial`` skips the size check."""
        widths = []
        for b, (est, delta) in enumerate(zip(r_est, self.deltas)):
            w = est - delta
            if not 0 <= w <= MAX_PACK_WIDTH:
                raise ChunkFormatError(f"chunk {self.chunk_id} block {b}: derived width {w} out of range")
            widths.append(w)
        reader = BitReader(self.data, self.header_bits_min)
        nbits = [w * self.cells_per_block for w in widths]
        try:
            if self.bit_reduction:
                lw = reader.read_unsigned(LENGTH_WIDTH_BITS)
                for b, w in enumerate(widths):
                    if entropy_coded(w, True):
                        nbits[b] = reader.read_unsigned(lw)
        except BitstreamError:
            raise ChunkFormatError(f"chunk {self.chunk_id}: truncated header") from None
        offsets = []
        pos = reader.pos
        for n in nbits:
            offsets.append(pos)
            pos += n
        if not partial:
            if (pos + 7) >> 3 != len(self.data):
                raise ChunkFormatError(
                    f"chunk {self.chunk_id}: payload is {len(self.data)} bytes, header implies {(pos + 7) >> 3}")
            tail = (-pos) % 8
            if tail and self.data[-1] & ((1 << tail) - 1):
                raise ChunkFormatError(f"chunk {self.chunk_id}: non-zero padding")
        return ChunkLayout(widths, offsets, nbits, pos)


def _encode_block(values: np.ndarray, width: int, bit_reduction: bool) -> tuple[bytes, int]:
    if entropy_coded(width, bit_reduction):
        t = huffman_table(width)
        return kernels.rle_huffman_encode(values, t.codes, t.lengths, t.offset)
    return kernels.pack_signmag(values, width)


def _decode_block(data: bytes, offset: int, nbits: int, count: int, width: int,
                  bit_reduction: bool) -> np.ndarray:
    if entropy_coded(width, bit_reduction):
        t = huffman_table(width)
        return kernels.rle_huffman_decode(data, offset, nbits, count, t.first_code, t.counts,
                                          t.first_index, t.symbols)
    return kernels.unpack_signmag(data, offset, count, width)


def encode_chunk(coeffs: np.ndarray, schema: ArraySchema, node_map: BlockNodeMap,
                 bounds: DecodedBounds, bit_reduction: bool = False,
                 chunk_id: int = 0) -> CompressedChunk:
    """Encode one transformed chunk (chunk-shaped coefficient array)."""
    blocks = split_blocks(np.asarray(coeffs, dtype=np.int64), schema)
    r_est = estimate_widths(node_map, bounds)
    out = BitWriter()
    payloads = []
    for b in range(schema.blocks_per_chunk):
        w = r_real(blocks[b])
        delta = r_est[b] - w
        if not -(1 << (DELTA_BITS - 1)) <= delta < (1 << (DELTA_BITS - 1)):
            raise ChunkFormatError(f"width differential {delta} does not fit in {DELTA_BITS} bits")
        out.write_unsigned(delta & ((1 << DELTA_BITS) - 1), DELTA_BITS)
        payloads.append((w, *_encode_block(blocks[b], w, bit_reduction)))
    if bit_reduction:
        coded = [n for w, _, n in payloads if entropy_coded(w, True)]
        lw = max((n.bit_length() for n in coded), default=0)
        out.write_unsigned(lw, LENGTH_WIDTH_BITS)
        for n in coded:
            out.write_unsigned(n, lw)
    for _, data, n in payloads:
        out.write_bytes_bits(data, n)
    return CompressedChunk(chunk_id, out.getvalue(), schema.blocks_per_chunk,
                           schema.cells_per_block, bit_reduction)


def decode_blocks(chunk: CompressedChunk, schema: ArraySchema, node_map: BlockNodeMap,
                  bounds: DecodedBounds, block_ids: Iterable[int] | None = None,
                  partial: bool = False) -> np.ndarray:
    """Decode the listed blocks; all other coefficients are left at zero."""
    layout = chunk.layout(estimate_widths(node_map, bounds), partial=partial)
    ids = range(schema.blocks_per_chunk) if block_ids is None else sorted(set(block_ids))
    blocks = np.zeros((schema.blocks_per_chunk, schema.cells_per_block), dtype=np.int64)
    for b in ids:
        try:
            vals = _decode_block(chunk.data, layout.offsets[b], layout.nbits[b],
                                 schema.cells_per_block, layout.widths[b], chunk.bit_reduction)
        except kernels.KernelError as exc:
            raise ChunkFormatError(f"chunk {chunk.chunk_id} block {b}: {exc}") from None
        if r_real(vals) != layout.widths[b]:
            raise ChunkFormatError(f"chunk {chunk.chunk_id} block {b}: payload width mismatch")
        blocks[b] = vals
    return join_blocks(blocks, schema)


def decode_chunk(chunk: CompressedChunk, schema: ArraySchema, node_map: BlockNodeMap,
                 bounds: DecodedBounds) -> np.ndarray:
    return decode_blocks(chunk, schema, node_map, bounds, None)
