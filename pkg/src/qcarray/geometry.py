"""Array geometry: two-level regular chunking and row-major addressing.

An array of ``m`` dimensions is split into fixed-size chunks (the unit of
I/O), and every chunk is split again into ``2**level`` blocks per dimension
(the unit of query processing and packing). Chunks, blocks and cells inside
a block are all numbered in row-major order, last dimension fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import prod
from typing import Iterator, Sequence

import numpy as np

# code -> (name, numpy dtype); the code is what the container stores
VALUE_TYPES = {
    0: ("uint8", np.dtype("<u1")),
    1: ("int8", np.dtype("<i1")),
    2: ("uint16", np.dtype("<u2")),
    3: ("int16", np.dtype("<i2")),
    4: ("int32", np.dtype("<i4")),
}
_CODE_BY_NAME = {name: code for code, (name, _) in VALUE_TYPES.items()}


class GeometryError(ValueError):
    """Invalid schema parameters or out-of-range coordinates."""


def value_type_code(name: str) -> int:
    try:
        return _CODE_BY_NAME[name]
    except KeyError:
        raise GeometryError(
            f"unsupported value type {name!r}; expected one of {sorted(_CODE_BY_NAME)}"
        ) from None


def value_dtype(name: str) -> np.dtype:
    return VALUE_TYPES[value_type_code(name)][1]


@dataclass(frozen=True)
class Region:
    """Half-open box ``[lo[d], hi[d])`` per dimension."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise GeometryError("region bounds have different dimensionality")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise GeometryError(f"region has lo > hi: {self.lo} {self.hi}")

    @classmethod
    def parse(cls, text: str) -> "Region":
        """Parse ``lo:hi`` ranges joined by commas, e.g. ``0:64,10:20``."""
        lo, hi = [], []
        for part in text.split(","):
            bits = part.strip().split(":")
            if len(bits) != 2:
                raise GeometryError(f"bad range {part!r}; expected lo:hi")
            try:
                lo.append(int(bits[0]))
                hi.append(int(bits[1]))
            except ValueError:
                raise GeometryError(f"bad range {part!r}; bounds must be integers") from None
        return cls(tuple(lo), tuple(hi))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return prod(self.shape)

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))

    def __str__(self) -> str:
        return ",".join(f"{l}:{h}" for l, h in zip(self.lo, self.hi))

    def intersect(self, other: "Region") -> "Region | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(l >= h for l, h in zip(lo, hi)):
            return None
        return Region(lo, hi)


@dataclass(frozen=True)
class ArraySchema:
    """Geometry of one single-attribute array.

    ``dims`` is the padded extent (a multiple of ``chunk_dims``); queries
    only ever expose cells inside ``logical_dims``.
    """

    dims: tuple[int, ...]
    chunk_dims: tuple[int, ...]
    wavelet_level: int
    value_type: str
    logical_dims: tuple[int, ...]

    def __post_init__(self):
        m = len(self.dims)
        if not (len(self.chunk_dims) == len(self.logical_dims) == m) or m == 0:
            raise GeometryError("dims, chunk_dims and logical_dims must share a positive rank")
        value_type_code(self.value_type)
        if self.wavelet_level < 0:
            raise GeometryError("wavelet level must be non-negative")
        step = 1 << self.wavelet_level
        for d in range(m):
            c = self.chunk_dims[d]
            if c <= 0 or self.logical_dims[d] <= 0:
                raise GeometryError(f"extents must be positive (dimension {d})")
            if c % step:
                raise GeometryError(
                    f"chunk extent {c} in dimension {d} is not divisible by 2**{self.wavelet_level}"
                )
            if self.dims[d] % c:
                raise GeometryError(f"dims[{d}]={self.dims[d]} is not a multiple of chunk extent {c}")
            if not self.logical_dims[d] <= self.dims[d] < self.logical_dims[d] + c:
                raise GeometryError(f"padding in dimension {d} exceeds one chunk")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def dtype(self) -> np.dtype:
        return value_dtype(self.value_type)

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(c >> self.wavelet_level for c in self.chunk_dims)

    @property
    def chunk_grid(self) -> tuple[int, ...]:
        return tuple(n // c for n, c in zip(self.dims, self.chunk_dims))

    @property
    def block_grid(self) -> tuple[int, ...]:
        """Blocks per chunk along each dimension (``2**level``)."""
        return (1 << self.wavelet_level,) * self.ndim

    @property
    def num_chunks(self) -> int:
        return prod(self.chunk_grid)

    @property
    def blocks_per_chunk(self) -> int:
        return 1 << (self.ndim * self.wavelet_level)

    @property
    def cells_per_block(self) -> int:
        return prod(self.block_dims)

    @property
    def logical_region(self) -> Region:
        return Region((0,) * self.ndim, tuple(self.logical_dims))

    def chunk_region(self, chunk_id: int) -> Region:
        cc = delinearize(chunk_id, self.chunk_grid)
        lo = tuple(c * e for c, e in zip(cc, self.chunk_dims))
        return Region(lo, tuple(l + e for l, e in zip(lo, self.chunk_dims)))

    def block_region(self, chunk_id: int, block_id: int) -> Region:
        """Source-space region of a plain (untransformed) block."""
        base = self.chunk_region(chunk_id).lo
        bc = delinearize(block_id, self.block_grid)
        lo = tuple(o + c * e for o, c, e in zip(base, bc, self.block_dims))
        return Region(lo, tuple(l + e for l, e in zip(lo, self.block_dims)))


def make_schema(logical_dims: Sequence[int], chunk_dims: Sequence[int],
                wavelet_level: int, value_type: str) -> ArraySchema:
    """Build a schema, rounding ``logical_dims`` up to whole chunks."""
    logical = tuple(int(x) for x in logical_dims)
    chunks = tuple(int(x) for x in chunk_dims)
    if len(logical) != len(chunks):
        raise GeometryError("logical_dims and chunk_dims differ in rank")
    if any(x <= 0 for x in logical + chunks):
        raise GeometryError("all extents must be positive")
    if wavelet_level < 0:
        raise GeometryError("wavelet level must be non-negative")
    dims = tuple(-(-n // c) * c for n, c in zip(logical, chunks))
    return ArraySchema(dims, chunks, int(wavelet_level), value_type, logical)


def linearize(coords: Sequence[int], extents: Sequence[int]) -> int:
    if len(coords) != len(extents):
        raise GeometryError("coordinate rank mismatch")
    index = 0
    for c, e in zip(coords, extents):
        if not 0 <= c < e:
            raise GeometryError(f"coordinates {tuple(coords)} outside extents {tuple(extents)}")
        index = index * e + c
    return index


def delinearize(index: int, extents: Sequence[int]) -> tuple[int, ...]:
    if not 0 <= index < prod(extents):
        raise GeometryError(f"index {index} outside extents {tuple(extents)}")
    out = []
    for e in reversed(extents):
        index, r = divmod(index, e)
        out.append(r)
    return tuple(reversed(out))


def locate(cell: Sequence[int], schema: ArraySchema) -> tuple[int, int, tuple[int, ...]]:
    """Return ``(chunk_id, block_id, offset_in_block)`` for a cell."""
    if len(cell) != schema.ndim or any(not 0 <= c < n for c, n in zip(cell, schema.dims)):
        raise GeometryError(f"cell {tuple(cell)} outside dims {schema.dims}")
    chunk = tuple(c // e for c, e in zip(cell, schema.chunk_dims))
    local = tuple(c % e for c, e in zip(cell, schema.chunk_dims))
    block = tuple(c // b for c, b in zip(local, schema.block_dims))
    offset = tuple(c % b for c, b in zip(local, schema.block_dims))
    return (linearize(chunk, schema.chunk_grid), linearize(block, schema.block_grid), offset)


def cell_of(chunk_id: int, block_id: int, offset: Sequence[int], schema: ArraySchema) -> tuple[int, ...]:
    """Inverse of :func:`locate`."""
    lo = schema.block_region(chunk_id, block_id).lo
    return tuple(l + o for l, o in zip(lo, offset))


def iter_grid(extents: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All coordinates of a grid in row-major order."""
    return product(*(range(e) for e in extents))


def chunks_in_region(region: Region, schema: ArraySchema) -> list[int]:
    """Chunk ids intersecting ``region``, ascending."""
    ranges = []
    for d in range(schema.ndim):
        if region.hi[d] <= region.lo[d]:
            return []
        c = schema.chunk_dims[d]
        ranges.append(range(region.lo[d] // c, (region.hi[d] - 1) // c + 1))
    return sorted(linearize(cc, schema.chunk_grid) for cc in product(*ranges))


def pad_array(values, schema: ArraySchema) -> np.ndarray:
    """Zero-pad a row-major logical array out to ``schema.dims``."""
    arr = np.asarray(values)
    if arr.size != prod(schema.logical_dims):
        raise GeometryError(
            f"expected {prod(schema.logical_dims)} values for logical dims "
            f"{schema.logical_dims}, got {arr.size}"
        )
    arr = arr.reshape(schema.logical_dims).astype(schema.dtype, copy=False)
    if tuple(schema.logical_dims) == tuple(schema.dims):
        return arr
    out = np.zeros(schema.dims, dtype=schema.dtype)
    out[schema.logical_region.slices()] = arr
    return out


def crop_array(padded: np.ndarray, schema: ArraySchema) -> np.ndarray:
    return padded[schema.logical_region.slices()]


def split_chunks(padded: np.ndarray, schema: ArraySchema) -> np.ndarray:
    """View the padded array as ``(num_chunks, *chunk_dims)``."""
    return _split(padded, schema.chunk_grid, schema.chunk_dims)


def join_chunks(chunks: np.ndarray, schema: ArraySchema) -> np.ndarray:
    return _join(chunks, schema.chunk_grid, schema.chunk_dims)


def split_blocks(chunk: np.ndarray, schema: ArraySchema) -> np.ndarray:
    """Chunk-shaped array -> ``(blocks_per_chunk, cells_per_block)``, both row-major."""
    return _split(chunk, schema.block_grid, schema.block_dims).reshape(
        schema.blocks_per_chunk, schema.cells_per_block)


def join_blocks(blocks: np.ndarray, schema: ArraySchema) -> np.ndarray:
    shaped = blocks.reshape((schema.blocks_per_chunk,) + schema.block_dims)
    return _join(shaped, schema.block_grid, schema.block_dims)


def _split(arr: np.ndarray, grid: Sequence[int], tile: Sequence[int]) -> np.ndarray:
    m = len(grid)
    interleaved = tuple(x for pair in zip(grid, tile) for x in pair)
    order = tuple(range(0, 2 * m, 2)) + tuple(range(1, 2 * m, 2))
    return arr.reshape(interleaved).transpose(order).reshape((prod(grid),) + tuple(tile))


def _join(tiles: np.ndarray, grid: Sequence[int], tile: Sequence[int]) -> np.ndarray:
    m = len(grid)
    arr = tiles.reshape(tuple(grid) + tuple(tile))
    order = tuple(x for d in range(m) for x in (d, m + d))
    return arr.transpose(order).reshape(tuple(g * t for g, t in zip(grid, tile)))
