"""Filter and range queries over a container, pruned by the min-max tree.

Planning is two-pass over a small operator chain ``filter -> range_select
-> scan``: each operator first attaches the chunk set it can restrict to
(inspection, leaf to root), then sets are intersected top-down
(propagation) so the scan only reads chunks every operator still needs.
Marked chunks are decoded in a worker pool, touching only the transformed
blocks needed for their marked source blocks; results are merged in
``(chunk, block, cell)`` order whatever the scheduling.
"""

from __future__ import annotations

import operator
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from . import wavelet
from .container import ContainerHandle
from .geometry import ArraySchema, GeometryError, Region, chunks_in_region, delinearize, linearize
from .hmmt import DecodedBounds, HmmtTopology

DEFAULT_THREADS = 6

_COMPARE: dict[str, Callable] = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


@dataclass(frozen=True)
class Predicate:
    """A single-value condition, kept as a closed interval (``None`` = unbounded)."""

    kind: str
    lo: int | None
    hi: int | None
    label: str = ""

    @classmethod
    def equals(cls, v: int) -> "Predicate":
        return cls("eq", int(v), int(v), f"== {v}")

    @classmethod
    def in_range(cls, lo: int, hi: int) -> "Predicate":
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return cls("range", int(lo), int(hi), f"in [{lo}, {hi}]")

    @classmethod
    def compare(cls, op: str, v: int) -> "Predicate":
        v = int(v)
        if op not in _COMPARE:
            raise ValueError(f"unknown comparison {op!r}")
        lo, hi = {"<": (None, v - 1), "<=": (None, v), ">": (v + 1, None), ">=": (v, None)}[op]
        return cls(op, lo, hi, f"{op} {v}")

    def satisfiable(self, lower: int, upper: int) -> bool:
        if self.lo is not None and upper < self.lo:
            return False
        if self.hi is not None and lower > self.hi:
            return False
        return True

    def mask(self, values: np.ndarray) -> np.ndarray:
        out = np.ones(values.shape, dtype=bool)
        if self.lo is not None:
            out &= values >= self.lo
        if self.hi is not None:
            out &= values <= self.hi
        return out

    def __str__(self) -> str:
        return self.label or self.kind


def evaluate_node(bounds: tuple[int, int], p: Predicate) -> bool:
    """Could any value in ``[lower, upper]`` satisfy ``p``?"""
    lower, upper = bounds
    return p.satisfiable(lower, upper)


@dataclass
class ChunkBlockBitmap:
    """Candidate flags per chunk and per (chunk, source block)."""

    chunks: np.ndarray
    blocks: np.ndarray

    @property
    def chunks_marked(self) -> int:
        return int(self.chunks.sum())

    @property
    def blocks_marked(self) -> int:
        return int(self.blocks.sum())


def candidate_bitmap(bounds: DecodedBounds, topology: HmmtTopology, p: Predicate,
                     schema: ArraySchema) -> ChunkBlockBitmap:
    """Breadth-first walk that only descends through nodes that may satisfy ``p``."""
    bm = ChunkBlockBitmap(np.zeros(schema.num_chunks, dtype=bool),
                          np.zeros((schema.num_chunks, schema.blocks_per_chunk), dtype=bool))
    L = schema.wavelet_level
    chunk_grid, block_grid = schema.chunk_grid, schema.block_grid
    queue = deque([(0, 0)])
    while queue:
        node = queue.popleft()
        lv, k = node
        ok = evaluate_node(bounds.bounds(node), p)
        if lv == topology.chunk_level:
            bm.chunks[k] = ok  # the chunk level's grid is the chunk grid
        if lv == topology.block_level:
            coords = delinearize(k, topology.grids[lv])
            c = linearize(tuple(x >> L for x in coords), chunk_grid)
            b = linearize(tuple(x & ((1 << L) - 1) for x in coords), block_grid)
            bm.blocks[c, b] = ok
            continue
        if ok:
            queue.extend(topology.children(node))
    return bm


# --- planning -----------------------------------------------------------------

@dataclass
class PlanNode:
    op: str
    detail: str
    bitmap: np.ndarray
    child: "PlanNode | None" = None


@dataclass
class QueryPlan:
    root: PlanNode
    region: Region
    predicate: Predicate | None
    candidates: ChunkBlockBitmap | None

    @property
    def leaf(self) -> PlanNode:
        node = self.root
        while node.child is not None:
            node = node.child
        return node

    @property
    def chunks(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.leaf.bitmap)]

    def nodes(self) -> list[PlanNode]:
        out, node = [], self.root
        while node is not None:
            out.append(node)
            node = node.child
        return out

    def explain(self) -> str:
        lines = []
        for depth, node in enumerate(self.nodes()):
            lines.append(f"{'  ' * depth}{node.op}({node.detail}) chunks={int(node.bitmap.sum())}")
        return "\n".join(lines)


def plan(schema: ArraySchema, bounds: DecodedBounds, topology: HmmtTopology,
         region: Region | None = None, predicate: Predicate | None = None) -> QueryPlan:
    logical = schema.logical_region
    if region is None:
        region = logical
    else:
        if region.intersect(logical) != region:
            raise GeometryError(f"region {region} is outside the logical extent {logical.hi}")
    n = schema.num_chunks

    # inspection: each operator attaches the chunks it can restrict to
    scan = PlanNode("scan", "array", np.ones(n, dtype=bool))
    geo = np.zeros(n, dtype=bool)
    geo[chunks_in_region(region, schema)] = True
    top = PlanNode("range_select", f"{region}", geo, scan)
    candidates = None
    if predicate is not None:
        candidates = candidate_bitmap(bounds, topology, predicate, schema)
        top = PlanNode("filter", str(predicate), candidates.chunks.copy(), top)

    # propagation: intersect downwards so the scan reads only what every ancestor needs
    node = top
    while node.child is not None:
        node.child.bitmap &= node.bitmap
        node = node.child
    return QueryPlan(top, region, predicate, candidates)


# --- execution ----------------------------------------------------------------

@dataclass
class QueryStats:
    chunks_marked: int = 0
    chunks_read: int = 0
    blocks_decoded: int = 0
    bytes_read: int = 0
    results: int = 0

    def report(self) -> dict[str, int]:
        return dict(self.__dict__)


@dataclass
class FilterResult:
    coords: np.ndarray
    values: np.ndarray
    stats: QueryStats = field(default_factory=QueryStats)

    def __len__(self) -> int:
        return len(self.values)

    def to_list(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(c), v) for c, v in zip(self.coords.tolist(), self.values.tolist())]

    def write_csv(self, out: TextIO) -> None:
        for c, v in zip(self.coords.tolist(), self.values.tolist()):
            out.write(",".join(map(str, c)) + f",{v}\n")


@dataclass
class RangeResult:
    values: np.ndarray
    region: Region
    stats: QueryStats = field(default_factory=QueryStats)


def _chunk_work(handle: ContainerHandle, qp: QueryPlan, chunk_id: int):
    """Decode what a chunk needs for the plan; returns (source blocks, cells, stats)."""
    s = handle.schema
    sources = wavelet.source_blocks_in_region(qp.region, chunk_id, s)
    if qp.candidates is not None:
        marked = qp.candidates.blocks[chunk_id]
        sources = [b for b in sources if marked[b]]
    if not sources:
        return sources, None, (0, 0, 0)
    needed = wavelet.transformed_blocks_for_source(sources, s)
    coeffs = handle.decode_chunk(chunk_id, needed)
    cells = wavelet.inverse_chunk(coeffs, s.wavelet_level, s.ndim)
    return sources, cells, (1, len(needed), handle.directory[chunk_id].length)


def _run(handle: ContainerHandle, qp: QueryPlan, threads: int):
    chunks = qp.chunks
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            outs = list(pool.map(lambda c: _chunk_work(handle, qp, c), chunks))
    else:
        outs = [_chunk_work(handle, qp, c) for c in chunks]
    stats = QueryStats(chunks_marked=len(chunks))
    for _, _, (nc, nb, nbytes) in outs:
        stats.chunks_read += nc
        stats.blocks_decoded += nb
        stats.bytes_read += nbytes
    return chunks, outs, stats


def _filter_exec(handle: ContainerHandle, qp: QueryPlan, threads: int) -> FilterResult:
    s = handle.schema
    chunks, outs, stats = _run(handle, qp, threads)
    coords, values = [], []
    for c, (sources, cells, _) in zip(chunks, outs):
        if cells is None:
            continue
        base = s.chunk_region(c).lo
        for b in sources:
            part = s.block_region(c, b).intersect(qp.region)
            if part is None:
                continue
            local = tuple(slice(l - o, h - o) for l, h, o in zip(part.lo, part.hi, base))
            vals = cells[local]
            hit = np.argwhere(qp.predicate.mask(vals))
            if len(hit):
                coords.append(hit + np.asarray(part.lo))
                values.append(vals[tuple(hit.T)])
    m = s.ndim
    res = FilterResult(np.concatenate(coords).astype(np.int64) if coords else np.zeros((0, m), np.int64),
                       np.concatenate(values).astype(s.dtype) if values else np.zeros(0, s.dtype),
                       stats)
    stats.results = len(res)
    return res


def filter(handle: ContainerHandle, p: Predicate, threads: int = DEFAULT_THREADS) -> FilterResult:
    """All logical cells whose value satisfies ``p``."""
    qp = plan(handle.schema, handle.bounds, handle.topology, None, p)
    return _filter_exec(handle, qp, threads)


def range_filter(handle: ContainerHandle, region: Region, p: Predicate,
                 threads: int = DEFAULT_THREADS) -> FilterResult:
    qp = plan(handle.schema, handle.bounds, handle.topology, region, p)
    return _filter_exec(handle, qp, threads)


def range(handle: ContainerHandle, region: Region, threads: int = DEFAULT_THREADS) -> RangeResult:
    """The exact sub-array covered by ``region``."""
    s = handle.schema
    qp = plan(s, handle.bounds, handle.topology, region, None)
    chunks, outs, stats = _run(handle, qp, threads)
    out = np.zeros(region.shape, dtype=s.dtype)
    for c, (_, cells, _) in zip(chunks, outs):
        part = s.chunk_region(c).intersect(region)
        base = s.chunk_region(c).lo
        src = tuple(slice(l - o, h - o) for l, h, o in zip(part.lo, part.hi, base))
        dst = tuple(slice(l - r, h - r) for l, h, r in zip(part.lo, part.hi, region.lo))
        out[dst] = cells[src]
    stats.results = out.size
    return RangeResult(out, region, stats)
