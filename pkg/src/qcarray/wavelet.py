"""Reversible integer Haar transform and the block <-> tree-node mappings.

The pair step is the S-transform: ``approx = floor((a + b) / 2)`` and
``detail = a - b``. Each level is applied to the current approximation
corner, dimension 0 first, so the approximation subband of an ``L``-level
transform sits at the origin and is exactly one block (the synopsis block).

All functions work on the trailing ``m`` axes, so a stack of chunks can be
transformed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .geometry import ArraySchema, GeometryError, Region, delinearize, linearize

WORK_DTYPE = np.int64


def _check(shape: Sequence[int], level: int) -> None:
    step = 1 << level
    if any(n % step for n in shape):
        raise GeometryError(f"chunk extents {tuple(shape)} not divisible by 2**{level}")


def forward_chunk(cells: np.ndarray, level: int, ndim: int | None = None) -> np.ndarray:
    """Forward transform of the trailing ``ndim`` axes (default: all)."""
    x = np.array(cells, dtype=WORK_DTYPE)
    m = x.ndim if ndim is None else ndim
    lead = x.ndim - m
    _check(x.shape[lead:], level)
    for lv in range(level):
        corner = [slice(None)] * lead + [slice(0, n >> lv) for n in x.shape[lead:]]
        for d in range(m):
            ax = lead + d
            sub = x[tuple(corner)]
            a = sub.take(np.arange(0, sub.shape[ax], 2), axis=ax)
            b = sub.take(np.arange(1, sub.shape[ax], 2), axis=ax)
            half = sub.shape[ax] // 2
            sub[_axis_slice(sub.ndim, ax, 0, half)] = (a + b) >> 1
            sub[_axis_slice(sub.ndim, ax, half, 2 * half)] = a - b
    return x


def inverse_chunk(coeffs: np.ndarray, level: int, ndim: int | None = None) -> np.ndarray:
    x = np.array(coeffs, dtype=WORK_DTYPE)
    m = x.ndim if ndim is None else ndim
    lead = x.ndim - m
    _check(x.shape[lead:], level)
    for lv in reversed(range(level)):
        corner = [slice(None)] * lead + [slice(0, n >> lv) for n in x.shape[lead:]]
        for d in reversed(range(m)):
            ax = lead + d
            sub = x[tuple(corner)]
            half = sub.shape[ax] // 2
            approx = sub[_axis_slice(sub.ndim, ax, 0, half)]
            detail = sub[_axis_slice(sub.ndim, ax, half, 2 * half)]
            b = approx - (detail >> 1)
            a = b + detail
            sub[_axis_slice(sub.ndim, ax, 0, 2 * half, 2)] = a
            sub[_axis_slice(sub.ndim, ax, 1, 2 * half, 2)] = b
    return x


def _axis_slice(ndim: int, axis: int, start: int, stop: int, step: int = 1):
    idx = [slice(None)] * ndim
    idx[axis] = slice(start, stop, step)
    return tuple(idx)


def synopsis_of(coeffs: np.ndarray, level: int, ndim: int | None = None) -> np.ndarray:
    """Copy of the approximation subband (the synopsis block)."""
    m = coeffs.ndim if ndim is None else ndim
    lead = coeffs.ndim - m
    idx = (slice(None),) * lead + tuple(slice(0, n >> level) for n in coeffs.shape[lead:])
    return coeffs[idx].copy()


# --- transformed block bookkeeping -------------------------------------------

def block_level(block_coords: Sequence[int], level: int) -> int:
    """Wavelet level of a transformed block; 0 marks the synopsis block."""
    h = max(block_coords)
    if h == 0:
        return 0
    return level - (h.bit_length() - 1)


def block_subband_position(block_coords: Sequence[int], level: int) -> tuple[int, ...]:
    """Subband-local coordinates ``p`` of a detail block."""
    lv = block_level(block_coords, level)
    if lv == 0:
        return tuple(0 for _ in block_coords)
    span = 1 << (level - lv)
    return tuple(q % span for q in block_coords)


def block_levels(schema: ArraySchema) -> list[int]:
    L = schema.wavelet_level
    return [block_level(delinearize(b, schema.block_grid), L) for b in range(schema.blocks_per_chunk)]


def transformed_blocks_for_source(source_blocks: Iterable[int], schema: ArraySchema) -> list[int]:
    """Transformed blocks needed to reconstruct the given plain blocks exactly.

    Follows the spatial orientation tree: the synopsis block plus, for every
    level, the detail blocks in all ``2**m - 1`` orientations at the parent
    position of each source block.
    """
    L, m = schema.wavelet_level, schema.ndim
    grid = schema.block_grid
    needed: set[int] = set()
    for sb in source_blocks:
        q = delinearize(sb, grid)
        needed.add(0)
        for lv in range(1, L + 1):
            p = tuple(c >> lv for c in q)
            off = 1 << (L - lv)
            for mask in range(1, 1 << m):
                coords = tuple(p[d] + (off if mask >> (m - 1 - d) & 1 else 0) for d in range(m))
                needed.add(linearize(coords, grid))
    if L == 0:
        needed = {int(b) for b in source_blocks}
    return sorted(needed)


def source_blocks_in_region(region: Region, chunk_id: int, schema: ArraySchema) -> list[int]:
    """Plain blocks of ``chunk_id`` that intersect ``region``."""
    chunk = schema.chunk_region(chunk_id)
    part = region.intersect(chunk)
    if part is None:
        raise GeometryError(f"region does not intersect chunk {chunk_id}")
    ranges = []
    for d in range(schema.ndim):
        b = schema.block_dims[d]
        lo = (part.lo[d] - chunk.lo[d]) // b
        hi = (part.hi[d] - 1 - chunk.lo[d]) // b
        ranges.append(range(lo, hi + 1))
    return sorted(linearize(c, schema.block_grid) for c in product(*ranges))


def blocks_for_region(region: Region, chunk_id: int, schema: ArraySchema) -> list[int]:
    """Minimal transformed block set that reconstructs ``region`` within one chunk."""
    return transformed_blocks_for_source(source_blocks_in_region(region, chunk_id, schema), schema)


@dataclass(frozen=True)
class BlockNodeMap:
    """Per transformed block: its wavelet level and the tree node it maps to.

    Node ids are ``(tree_level, flat index within that level)``.
    """

    levels: tuple[int, ...]
    nodes: tuple[tuple[int, int], ...]


def block_node_map(schema: ArraySchema, chunk_id: int, topology) -> BlockNodeMap:
    """Map each transformed block of a chunk onto its tree node.

    The synopsis block and level-``L`` detail blocks map to the chunk's own
    node; a level-``l`` detail block at subband position ``p`` maps to the
    node whose fragment covers the source region ``p`` scaled by ``2**l``.
    Mappings never cross the chunk boundary.
    """
    if topology.grids[topology.block_level] != tuple(
            g * (1 << schema.wavelet_level) for g in schema.chunk_grid):
        raise GeometryError("tree topology was built for a different schema")
    L = schema.wavelet_level
    chunk = delinearize(chunk_id, schema.chunk_grid)
    levels, nodes = [], []
    for b in range(schema.blocks_per_chunk):
        q = delinearize(b, schema.block_grid)
        lv = block_level(q, L)
        if L == 0:
            tree_level, coords = topology.block_level, chunk
        elif lv == 0:
            tree_level, coords = topology.chunk_level, chunk
        else:
            p = block_subband_position(q, L)
            span = 1 << (L - lv)
            tree_level = topology.block_level - lv
            coords = tuple(c * span + pp for c, pp in zip(chunk, p))
        levels.append(lv)
        nodes.append((tree_level, linearize(coords, topology.grids[tree_level])))
    return BlockNodeMap(tuple(levels), tuple(nodes))
