"""Pure numpy/Python implementations of the per-cell kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the extension is tested against. Bit strings are MSB-first.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


class KernelError(ValueError):
    pass


def _expand_tokens(values: np.ndarray, lengths: np.ndarray) -> tuple[bytes, int]:
    """Concatenate variable-length tokens into a packed bit string."""
    lengths = lengths.astype(np.int64)
    total = int(lengths.sum())
    if total == 0:
        return b"", 0
    keep = lengths > 0
    values, lengths = values[keep].astype(np.uint64), lengths[keep]
    owner = np.repeat(np.arange(len(lengths)), lengths)
    starts = np.cumsum(lengths) - lengths
    pos = np.arange(total, dtype=np.int64) - starts[owner]
    shift = (lengths[owner] - 1 - pos).astype(np.uint64)
    bits = ((values[owner] >> shift) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits).tobytes(), total


def _bit_slice(data: bytes, bit_offset: int, nbits: int) -> np.ndarray:
    if bit_offset + nbits > 8 * len(data):
        raise KernelError("payload extends past end of buffer")
    first = bit_offset >> 3
    last = (bit_offset + nbits + 7) >> 3
    raw = np.frombuffer(data, dtype=np.uint8, count=last - first, offset=first)
    skip = bit_offset & 7
    return np.unpackbits(raw)[skip:skip + nbits]


def pack_signmag(values: np.ndarray, width: int) -> tuple[bytes, int]:
    """Pack integers in ``width``-bit sign-magnitude fields."""
    v = np.asarray(values, dtype=np.int64)
    if width == 0:
        if v.size and np.any(v):
            raise KernelError("non-zero value at width 0")
        return b"", 0
    mag = np.abs(v).astype(np.uint64)
    if v.size and int(mag.max()) >> (width - 1):
        raise KernelError(f"value does not fit in {width} sign-magnitude bits")
    words = mag | ((v < 0).astype(np.uint64) << np.uint64(width - 1))
    return _expand_tokens(words, np.full(v.size, width, dtype=np.int64))


def unpack_signmag(data: bytes, bit_offset: int, count: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(count, dtype=np.int64)
    bits = _bit_slice(data, bit_offset, count * width).reshape(count, width).astype(np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    words = (bits << shifts).sum(axis=1, dtype=np.uint64) if count else np.zeros(0, np.uint64)
    mag = (words & np.uint64((1 << (width - 1)) - 1)).astype(np.int64)
    neg = (words >> np.uint64(width - 1)).astype(bool)
    return np.where(neg, -mag, mag)


def rle_huffman_encode(values: np.ndarray, codes: np.ndarray, lengths: np.ndarray,
                       offset: int) -> tuple[bytes, int]:
    """Run-length encode, then emit ``codeword(symbol) gamma(run)`` per run."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        return b"", 0
    starts = np.flatnonzero(np.concatenate(([True], v[1:] != v[:-1])))
    runs = np.diff(np.append(starts, v.size)).astype(np.uint64)
    idx = v[starts] + offset
    if idx.min() < 0 or idx.max() >= len(codes):
        raise KernelError("symbol outside Huffman table")
    run_bits = np.frexp(runs.astype(np.float64))[1].astype(np.int64)
    tok_vals = np.empty(2 * len(starts), dtype=np.uint64)
    tok_lens = np.empty(2 * len(starts), dtype=np.int64)
    tok_vals[0::2] = codes[idx]
    tok_lens[0::2] = lengths[idx]
    tok_vals[1::2] = runs
    tok_lens[1::2] = 2 * run_bits - 1
    return _expand_tokens(tok_vals, tok_lens)


def rle_huffman_decode(data: bytes, bit_offset: int, nbits: int, count: int,
                       first_code: np.ndarray, counts: np.ndarray, first_index: np.ndarray,
                       symbols: np.ndarray) -> np.ndarray:
    bits = _bit_slice(data, bit_offset, nbits).tolist()
    first_code = first_code.tolist()
    counts = counts.tolist()
    first_index = first_index.tolist()
    symbols = symbols.tolist()
    max_len = len(counts) - 1
    out = np.empty(count, dtype=np.int64)
    filled = 0
    pos = 0
    while filled < count:
        code = 0
        length = 0
        while True:
            if pos >= nbits:
                raise KernelError("truncated Huffman payload")
            code = (code << 1) | bits[pos]
            pos += 1
            length += 1
            if length > max_len:
                raise KernelError("invalid Huffman codeword")
            c = code - first_code[length]
            if 0 <= c < counts[length]:
                sym = symbols[first_index[length] + c]
                break
        zeros = 0
        while True:
            if pos >= nbits:
                raise KernelError("truncated run length")
            b = bits[pos]
            pos += 1
            if b:
                break
            zeros += 1
        if pos + zeros > nbits:
            raise KernelError("truncated run length")
        run = 1
        for _ in range(zeros):
            run = (run << 1) | bits[pos]
            pos += 1
        if filled + run > count:
            raise KernelError("run overflows block")
        out[filled:filled + run] = sym
        filled += run
    if pos != nbits:
        raise KernelError(f"{nbits - pos} unused bits in Huffman payload")
    return out
