# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t, uint8_t

cnp.import_array()

BACKEND = "cython"


class KernelError(ValueError):
    pass


cdef struct Writer:
    uint8_t* buf
    Py_ssize_t n
    uint64_t acc
    int nacc


cdef inline void _put(Writer* w, uint64_t value, int nbits) noexcept nogil:
    # nbits <= 56 per call
    w.acc = (w.acc << nbits) | value
    w.nacc += nbits
    while w.nacc >= 8:
        w.nacc -= 8
        w.buf[w.n] = <uint8_t>((w.acc >> w.nacc) & 0xFF)
        w.n += 1


cdef inline void _put_long(Writer* w, uint64_t value, int nbits) noexcept nogil:
    if nbits > 32:
        _put(w, value >> 32, nbits - 32)
        _put(w, value & ((<uint64_t>1 << 32) - 1), 32)
    elif nbits > 0:
        _put(w, value, nbits)


cdef inline void _flush(Writer* w) noexcept nogil:
    if w.nacc:
        w.buf[w.n] = <uint8_t>((w.acc << (8 - w.nacc)) & 0xFF)
        w.n += 1
        w.nacc = 0


cdef struct Reader:
    const uint8_t* buf
    Py_ssize_t next_byte
    uint64_t acc
    int nacc


cdef inline uint64_t _get(Reader* r, int nbits) noexcept nogil:
    # nbits <= 56; caller guarantees enough input
    while r.nacc < nbits:
        r.acc = (r.acc << 8) | r.buf[r.next_byte]
        r.next_byte += 1
        r.nacc += 8
    r.nacc -= nbits
    return (r.acc >> r.nacc) & ((<uint64_t>1 << nbits) - 1)


cdef inline uint64_t _get_long(Reader* r, int nbits) noexcept nogil:
    cdef uint64_t hi
    if nbits > 32:
        hi = _get(r, nbits - 32)
        return (hi << 32) | _get(r, 32)
    if nbits == 0:
        return 0
    return _get(r, nbits)


cdef inline void _seek(Reader* r, const uint8_t* buf, Py_ssize_t bit_offset) noexcept nogil:
    r.buf = buf
    r.next_byte = bit_offset >> 3
    r.acc = 0
    r.nacc = 0
    if bit_offset & 7:
        _get(r, bit_offset & 7)


def pack_signmag(values, int width):
    cdef const int64_t[::1] v = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t i, n = v.shape[0]
    cdef uint64_t mag, limit
    if width == 0:
        for i in range(n):
            if v[i] != 0:
                raise KernelError("non-zero value at width 0")
        return b"", 0
    limit = (<uint64_t>1) << (width - 1)
    out = np.zeros((n * width + 7) // 8, dtype=np.uint8)
    cdef uint8_t[::1] ob = out
    cdef Writer w
    w.buf = &ob[0] if ob.shape[0] else NULL
    w.n = 0
    w.acc = 0
    w.nacc = 0
    for i in range(n):
        if v[i] < 0:
            mag = <uint64_t>(-v[i])
            if mag >= limit:
                raise KernelError(f"value does not fit in {width} sign-magnitude bits")
            _put_long(&w, mag | limit, width)
        else:
            mag = <uint64_t>v[i]
            if mag >= limit:
                raise KernelError(f"value does not fit in {width} sign-magnitude bits")
            _put_long(&w, mag, width)
    _flush(&w)
    return out.tobytes(), n * width


def unpack_signmag(data, Py_ssize_t bit_offset, Py_ssize_t count, int width):
    cdef const uint8_t[::1] buf = np.frombuffer(data, dtype=np.uint8)
    out = np.zeros(count, dtype=np.int64)
    if width == 0 or count == 0:
        return out
    if bit_offset + count * width > 8 * buf.shape[0]:
        raise KernelError("payload extends past end of buffer")
    cdef int64_t[::1] o = out
    cdef Reader r
    cdef Py_ssize_t i
    cdef uint64_t word, sign = (<uint64_t>1) << (width - 1)
    with nogil:
        _seek(&r, &buf[0], bit_offset)
        for i in range(count):
            word = _get_long(&r, width)
            if word & sign:
                o[i] = -<int64_t>(word ^ sign)
            else:
                o[i] = <int64_t>word
    return out


cdef inline int _bitlen(uint64_t x) noexcept nogil:
    cdef int n = 0
    while x:
        x >>= 1
        n += 1
    return n


def rle_huffman_encode(values, codes, lengths, int64_t offset):
    cdef const int64_t[::1] v = np.ascontiguousarray(values, dtype=np.int64)
    cdef const uint64_t[::1] cw = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const uint8_t[::1] cl = np.ascontiguousarray(lengths, dtype=np.uint8)
    cdef Py_ssize_t n = v.shape[0], nsym = cw.shape[0], i = 0, j
    cdef int64_t idx
    cdef uint64_t run
    cdef int rb, maxlen = 0
    if n == 0:
        return b"", 0
    for j in range(cl.shape[0]):
        if cl[j] > maxlen:
            maxlen = cl[j]
    # worst case: every cell is its own run (codeword + 1-bit gamma)
    out = np.zeros(n * (maxlen + 1) // 8 + 16, dtype=np.uint8)
    cdef uint8_t[::1] ob = out
    cdef Writer w
    w.buf = &ob[0]
    w.n = 0
    w.acc = 0
    w.nacc = 0
    cdef Py_ssize_t total = 0
    while i < n:
        j = i + 1
        while j < n and v[j] == v[i]:
            j += 1
        idx = v[i] + offset
        if idx < 0 or idx >= nsym:
            raise KernelError("symbol outside Huffman table")
        run = <uint64_t>(j - i)
        rb = _bitlen(run)
        _put_long(&w, cw[idx], cl[idx])
        _put_long(&w, run, 2 * rb - 1)
        total += cl[idx] + 2 * rb - 1
        i = j
    _flush(&w)
    return out[:w.n].tobytes(), total


def rle_huffman_decode(data, Py_ssize_t bit_offset, Py_ssize_t nbits, Py_ssize_t count,
                       first_code, counts, first_index, symbols):
    cdef const uint8_t[::1] buf = np.frombuffer(data, dtype=np.uint8)
    cdef const uint64_t[::1] fc = np.ascontiguousarray(first_code, dtype=np.uint64)
    cdef const int64_t[::1] cnt = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const int64_t[::1] fi = np.ascontiguousarray(first_index, dtype=np.int64)
    cdef const int64_t[::1] sy = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef int max_len = cnt.shape[0] - 1
    if bit_offset + nbits > 8 * buf.shape[0]:
        raise KernelError("payload extends past end of buffer")
    out = np.zeros(count, dtype=np.int64)
    if count == 0:
        if nbits:
            raise KernelError("unused bits in Huffman payload")
        return out
    cdef int64_t[::1] o = out
    cdef Reader r
    cdef Py_ssize_t filled = 0, used = 0, k
    cdef uint64_t code, run
    cdef int length, zeros, err = 0
    cdef int64_t sym = 0
    with nogil:
        _seek(&r, &buf[0], bit_offset)
        while filled < count:
            code = 0
            length = 0
            while True:
                if used >= nbits:
                    err = 1
                    break
                code = (code << 1) | _get(&r, 1)
                used += 1
                length += 1
                if length > max_len:
                    err = 2
                    break
                if code >= fc[length] and <int64_t>(code - fc[length]) < cnt[length]:
                    sym = sy[fi[length] + <int64_t>(code - fc[length])]
                    break
            if err:
                break
            zeros = 0
            while True:
                if used >= nbits:
                    err = 3
                    break
                used += 1
                if _get(&r, 1):
                    break
                zeros += 1
            if err:
                break
            if used + zeros > nbits or zeros > 62:
                err = 3
                break
            run = 1
            for k in range(zeros):
                run = (run << 1) | _get(&r, 1)
            used += zeros
            if <Py_ssize_t>run > count - filled:
                err = 4
                break
            for k in range(<Py_ssize_t>run):
                o[filled + k] = sym
            filled += run
    if err == 1:
        raise KernelError("truncated Huffman payload")
    if err == 2:
        raise KernelError("invalid Huffman codeword")
    if err == 3:
        raise KernelError("truncated run length")
    if err == 4:
        raise KernelError("run overflows block")
    if used != nbits:
        raise KernelError(f"{nbits - used} unused bits in Huffman payload")
    return out
