"""Whole-array compress / decompress built from the per-stage modules."""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from typing import BinaryIO, Sequence

import numpy as np

from . import hmmt, wavelet
from .codec import encode_chunk
from .container import ContainerHandle, open_container, write_container
from .geometry import ArraySchema, crop_array, join_chunks, make_schema, pad_array, split_chunks

DEFAULT_LEVEL = 3
DEFAULT_CHUNK = 64


def default_chunk_dims(shape: Sequence[int], level: int = DEFAULT_LEVEL) -> tuple[int, ...]:
    """64 per dimension, shrunk for small arrays but kept divisible by ``2**level``."""
    step = 1 << level
    return tuple(-(-min(n, DEFAULT_CHUNK) // step) * step for n in shape)


def encode_array(values, chunk_dims: Sequence[int] | None = None, level: int = DEFAULT_LEVEL,
                 bit_reduction: bool = True, value_type: str | None = None, threads: int = 1):
    """Run every compression stage; returns ``(schema, tree_bytes, tree_bits, chunks)``."""
    arr = np.asarray(values)
    vt = value_type or arr.dtype.name
    schema = make_schema(arr.shape, chunk_dims or default_chunk_dims(arr.shape, level), level, vt)
    padded = pad_array(arr, schema)
    topo, tree = hmmt.build(padded, schema)
    tree_bytes, tree_bits = hmmt.compress(tree)
    # the encoder works from the decoded bounds so its width estimates match the decoder's
    bounds = hmmt.decompress(tree_bytes, topo, vt, tree_bits)
    coeffs = wavelet.forward_chunk(split_chunks(padded, schema), level, schema.ndim)

    def one(c: int):
        nm = wavelet.block_node_map(schema, c, topo)
        return encode_chunk(coeffs[c], schema, nm, bounds, bit_reduction, c)

    if threads > 1 and schema.num_chunks > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(one, range(schema.num_chunks)))
    else:
        chunks = [one(c) for c in range(schema.num_chunks)]
    return schema, tree_bytes, tree_bits, chunks


def compress_array(values, chunk_dims: Sequence[int] | None = None, level: int = DEFAULT_LEVEL,
                   bit_reduction: bool = True, value_type: str | None = None, threads: int = 1) -> bytes:
    schema, tb, nbits, chunks = encode_array(values, chunk_dims, level, bit_reduction, value_type, threads)
    buf = io.BytesIO()
    write_container(buf, schema, tb, nbits, chunks, bit_reduction)
    return buf.getvalue()


def compress_to(sink: BinaryIO | str | os.PathLike, values, **kwargs) -> int:
    bit_reduction = kwargs.get("bit_reduction", True)
    schema, tb, nbits, chunks = encode_array(values, **kwargs)
    return write_container(sink, schema, tb, nbits, chunks, bit_reduction)


def decode_padded(handle: ContainerHandle, threads: int = 1) -> np.ndarray:
    s = handle.schema
    if threads > 1 and s.num_chunks > 1:
        with ThreadPoolExecutor(threads) as pool:
            coeffs = list(pool.map(handle.decode_chunk, range(s.num_chunks)))
    else:
        coeffs = [handle.decode_chunk(c) for c in range(s.num_chunks)]
    cells = wavelet.inverse_chunk(np.stack(coeffs), s.wavelet_level, s.ndim)
    return join_chunks(cells, s).astype(s.dtype)


def decompress_array(source, threads: int = 1) -> np.ndarray:
    """Decode a container (bytes, path or binary file) back to its logical array."""
    if isinstance(source, ContainerHandle):
        return crop_array(decode_padded(source, threads), source.schema).copy()
    with open_container(source) as handle:
        return crop_array(decode_padded(handle, threads), handle.schema).copy()


def synopsis_array(values, schema: ArraySchema) -> np.ndarray:
    """Reference synopsis straight from the raw array (used by tests and tools)."""
    padded = pad_array(values, schema)
    coeffs = wavelet.forward_chunk(split_chunks(padded, schema), schema.wavelet_level, schema.ndim)
    syn = wavelet.synopsis_of(coeffs, schema.wavelet_level, schema.ndim)
    m = schema.ndim
    arr = syn.reshape(tuple(schema.chunk_grid) + tuple(schema.block_dims))
    order = tuple(x for d in range(m) for x in (d, m + d))
    return arr.transpose(order).reshape(tuple(g * b for g, b in zip(schema.chunk_grid, schema.block_dims)))
