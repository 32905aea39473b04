"""On-disk container: header, compressed tree, chunk directory, chunks.

The byte layout is documented in FORMAT.md. ``open_container`` reads only
the header; chunks are fetched lazily through positional reads so a handle
can serve concurrent readers.
"""

from __future__ import annotations

import io
import os
import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from . import hmmt
from .codec import (DELTA_BITS, LENGTH_WIDTH_BITS, ChunkFormatError, CompressedChunk,
                    entropy_coded, estimate_widths, decode_blocks)
from .geometry import VALUE_TYPES, ArraySchema, GeometryError, value_type_code
from .wavelet import BlockNodeMap, block_node_map

MAGIC = b"SCOW"
VERSION = 1
FLAG_BIT_REDUCTION = 0x01
_PREFIX = struct.Struct("<4sBBBBB")
_U64 = struct.Struct("<Q")
_DIR_ENTRY = struct.Struct("<QQI")


class ContainerFormatError(ValueError):
    """The input is not a well-formed container."""


@dataclass(frozen=True)
class DirectoryEntry:
    offset: int
    length: int
    crc32: int


def _header_bytes(schema: ArraySchema, bit_reduction: bool, tree_bytes: bytes, tree_bits: int,
                  lengths: Sequence[int], crcs: Sequence[int]) -> bytes:
    out = bytearray(_PREFIX.pack(MAGIC, VERSION, value_type_code(schema.value_type), schema.ndim,
                                 schema.wavelet_level, FLAG_BIT_REDUCTION if bit_reduction else 0))
    for seq in (schema.logical_dims, schema.dims, schema.chunk_dims):
        out += struct.pack(f"<{schema.ndim}Q", *seq)
    out += _U64.pack(tree_bits) + tree_bytes + _U64.pack(len(lengths))
    offset = len(out) + _DIR_ENTRY.size * len(lengths)
    for n, crc in zip(lengths, crcs):
        out += _DIR_ENTRY.pack(offset, n, crc)
        offset += n
    return bytes(out)


def write_container(sink: BinaryIO | str | os.PathLike, schema: ArraySchema, tree_bytes: bytes,
                    tree_bits: int, chunks: Sequence[CompressedChunk], bit_reduction: bool) -> int:
    """Write header then chunks in id order; returns the byte count."""
    if len(chunks) != schema.num_chunks:
        raise ValueError(f"expected {schema.num_chunks} chunks, got {len(chunks)}")
    if any(c.chunk_id != i for i, c in enumerate(chunks)):
        raise ValueError("chunks must be supplied in chunk-id order")
    if len(tree_bytes) != (tree_bits + 7) // 8:
        raise ValueError("tree byte length does not match its bit length")
    header = _header_bytes(schema, bit_reduction, tree_bytes, tree_bits,
                           [len(c.data) for c in chunks], [zlib.crc32(c.data) for c in chunks])
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            return write_container(fh, schema, tree_bytes, tree_bits, chunks, bit_reduction)
    total = sink.write(header)
    for c in chunks:
        total += sink.write(c.data)
    return total


class _Source:
    """Positional reads over a path, an open file, or an in-memory buffer."""

    def __init__(self, source):
        self._fd = None
        self._buf = None
        self._fh = None
        self._lock = threading.Lock()
        if isinstance(source, (bytes, bytearray, memoryview)):
            self._buf = bytes(source)
            self.size = len(self._buf)
        elif isinstance(source, (str, os.PathLike)):
            self._fd = os.open(os.fspath(source), os.O_RDONLY)
            self.size = os.fstat(self._fd).st_size
        else:
            self._fh = source
            self.size = source.seek(0, io.SEEK_END)

    def pread(self, offset: int, n: int) -> bytes:
        if n < 0 or offset + n > self.size:
            raise ContainerFormatError(
                f"truncated container: need bytes [{offset}, {offset + n}) of {self.size}")
        if self._buf is not None:
            return self._buf[offset:offset + n]
        if self._fd is not None:
            data = os.pread(self._fd, n, offset)
        else:
            with self._lock:
                self._fh.seek(offset)
                data = self._fh.read(n)
        if len(data) != n:
            raise ContainerFormatError("short read")
        return data

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None


class ContainerHandle:
    """Schema, decoded tree bounds and chunk directory of an opened container."""

    def __init__(self, source):
        self._src = _Source(source)
        self._lock = threading.Lock()
        self.bytes_read = 0
        self.chunks_read = 0
        self._maps: dict[int, BlockNodeMap] = {}
        try:
            self._read_header()
        except BaseException:
            self._src.close()
            raise

    # -- accounting ---------------------------------------------------------

    def _read(self, offset: int, n: int) -> bytes:
        data = self._src.pread(offset, n)
        with self._lock:
            self.bytes_read += n
        return data

    def reset_counters(self) -> None:
        with self._lock:
            self.bytes_read = 0
            self.chunks_read = 0

    def _read_header(self) -> None:
        magic, version, vcode, m, L, flags = _PREFIX.unpack(self._read(0, _PREFIX.size))
        if magic != MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ContainerFormatError(f"unsupported format version {version}")
        if vcode not in VALUE_TYPES:
            raise ContainerFormatError(f"unknown value type code {vcode}")
        if m == 0 or flags & ~FLAG_BIT_REDUCTION:
            raise ContainerFormatError("invalid header fields")
        pos = _PREFIX.size
        raw = struct.unpack(f"<{3 * m}Q", self._read(pos, 24 * m))
        pos += 24 * m
        try:
            self.schema = ArraySchema(tuple(raw[m:2 * m]), tuple(raw[2 * m:]), L,
                                      VALUE_TYPES[vcode][0], tuple(raw[:m]))
        except GeometryError as exc:
            raise ContainerFormatError(f"invalid schema: {exc}") from None
        self.bit_reduction = bool(flags & FLAG_BIT_REDUCTION)
        (tree_bits,) = _U64.unpack(self._read(pos, 8))
        pos += 8
        self.tree_bytes = self._read(pos, (tree_bits + 7) // 8)
        self.tree_bits = tree_bits
        pos += len(self.tree_bytes)
        self.topology = hmmt.HmmtTopology.from_schema(self.schema)
        try:
            self.bounds = hmmt.decompress(self.tree_bytes, self.topology, self.schema.value_type, tree_bits)
        except hmmt.HmmtFormatError as exc:
            raise ContainerFormatError(f"corrupt tree: {exc}") from None
        (n,) = _U64.unpack(self._read(pos, 8))
        pos += 8
        if n != self.schema.num_chunks:
            raise ContainerFormatError(f"directory has {n} entries, schema needs {self.schema.num_chunks}")
        raw_dir = self._read(pos, _DIR_ENTRY.size * n)
        self.header_size = pos + len(raw_dir)
        self.directory = [DirectoryEntry(*e) for e in _DIR_ENTRY.iter_unpack(raw_dir)]
        expect = self.header_size
        for i, e in enumerate(self.directory):
            if e.offset != expect:
                raise ContainerFormatError(f"chunk {i} is not contiguous with its predecessor")
            expect += e.length
        if expect != self._src.size:
            raise ContainerFormatError(f"file size {self._src.size} does not match directory ({expect})")

    # -- chunk access -------------------------------------------------------

    def node_map(self, chunk_id: int) -> BlockNodeMap:
        nm = self._maps.get(chunk_id)
        if nm is None:
            nm = self._maps[chunk_id] = block_node_map(self.schema, chunk_id, self.topology)
        return nm

    def _entry(self, chunk_id: int) -> DirectoryEntry:
        if not 0 <= chunk_id < len(self.directory):
            raise IndexError(f"chunk id {chunk_id} out of range")
        return self.directory[chunk_id]

    def _chunk(self, chunk_id: int, data: bytes) -> CompressedChunk:
        s = self.schema
        return CompressedChunk(chunk_id, data, s.blocks_per_chunk, s.cells_per_block, self.bit_reduction)

    def read_chunk(self, chunk_id: int) -> CompressedChunk:
        e = self._entry(chunk_id)
        data = self._read(e.offset, e.length)
        if zlib.crc32(data) != e.crc32:
            raise ContainerFormatError(f"chunk {chunk_id}: checksum mismatch")
        with self._lock:
            self.chunks_read += 1
        return self._chunk(chunk_id, data)

    def decode_chunk(self, chunk_id: int, block_ids=None) -> np.ndarray:
        """Transformed coefficients of one chunk; unlisted blocks stay zero."""
        chunk = self.read_chunk(chunk_id)
        try:
            return decode_blocks(chunk, self.schema, self.node_map(chunk_id), self.bounds, block_ids)
        except ChunkFormatError as exc:
            raise ContainerFormatError(str(exc)) from None

    def read_synopsis(self, chunk_id: int) -> np.ndarray:
        """Synopsis block of one chunk, reading only the bytes in front of its end."""
        e = self._entry(chunk_id)
        s = self.schema
        nm = self.node_map(chunk_id)
        r_est = estimate_widths(nm, self.bounds)
        head_bits = s.blocks_per_chunk * DELTA_BITS + (LENGTH_WIDTH_BITS if self.bit_reduction else 0)
        need = min((head_bits + 7) // 8, e.length)
        prefix = self._read(e.offset, need)
        try:
            chunk = self._chunk(chunk_id, prefix)
            if self.bit_reduction:
                widths = [r - d for r, d in zip(r_est, chunk.deltas)]
                reader_pos = s.blocks_per_chunk * DELTA_BITS
                lw = _bits_at(prefix, reader_pos, LENGTH_WIDTH_BITS)
                coded = sum(entropy_coded(w, True) for w in widths)
                lengths_end = head_bits + coded * lw
                need2 = min((lengths_end + 7) // 8, e.length)
                if need2 > need:
                    prefix += self._read(e.offset + need, need2 - need)
                    need = need2
                    chunk = self._chunk(chunk_id, prefix)
            layout = chunk.layout(r_est, partial=True)
            end = min(layout.block_bytes_end(0), e.length)
            if end > need:
                prefix += self._read(e.offset + need, end - need)
                chunk = self._chunk(chunk_id, prefix)
            coeffs = decode_blocks(chunk, s, nm, self.bounds, [0], partial=True)
        except ChunkFormatError as exc:
            raise ContainerFormatError(str(exc)) from None
        return coeffs[tuple(slice(0, b) for b in s.block_dims)]

    def synopsis(self) -> np.ndarray:
        """Per-chunk synopses tiled over the chunk grid (padded extent)."""
        s = self.schema
        tiles = np.stack([self.read_synopsis(c) for c in range(s.num_chunks)])
        m = s.ndim
        arr = tiles.reshape(tuple(s.chunk_grid) + tuple(s.block_dims))
        order = tuple(x for d in range(m) for x in (d, m + d))
        return arr.transpose(order).reshape(tuple(g * b for g, b in zip(s.chunk_grid, s.block_dims)))

    @property
    def file_size(self) -> int:
        return self._src.size

    def close(self) -> None:
        self._src.close()

    def __enter__(self) -> "ContainerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _bits_at(data: bytes, bit_offset: int, nbits: int) -> int:
    first, last = bit_offset >> 3, (bit_offset + nbits + 7) >> 3
    if last > len(data):
        raise ContainerFormatError("truncated chunk header")
    word = int.from_bytes(data[first:last], "big")
    return (word >> (8 * (last - first) - (bit_offset & 7) - nbits)) & ((1 << nbits) - 1)


def open_container(source: str | Path | bytes | BinaryIO) -> ContainerHandle:
    return ContainerHandle(source)
