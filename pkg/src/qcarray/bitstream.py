"""MSB-first bit writer/reader with an adjustable field width.

Every field is written most-significant bit first; the stream is zero
padded to a byte boundary only when it is finished.
"""

from __future__ import annotations


class BitstreamError(ValueError):
    """Overflowing writes or reads past the end of a stream."""


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.width = 0

    def set_width(self, width: int) -> "BitWriter":
        if not 0 <= width <= 64:
            raise BitstreamError(f"field width {width} outside [0, 64]")
        self.width = width
        return self

    def write_unsigned(self, value: int, width: int | None = None) -> "BitWriter":
        w = self.width if width is None else width
        if value < 0 or value >> w:
            raise BitstreamError(f"value {value} does not fit in {w} unsigned bits")
        return self._put(value, w)

    def write_sign_magnitude(self, value: int, width: int) -> "BitWriter":
        if width < 1 or abs(value) >> (width - 1):
            raise BitstreamError(f"value {value} does not fit in {width} sign-magnitude bits")
        sign = 1 if value < 0 else 0
        return self._put((sign << (width - 1)) | abs(value), width)

    def write_bits(self, value: int, nbits: int) -> "BitWriter":
        """Append an arbitrarily long bit string held in an int."""
        if value < 0 or value >> nbits:
            raise BitstreamError(f"bit string does not fit in {nbits} bits")
        return self._put(value, nbits)

    def write_bytes_bits(self, data: bytes, nbits: int) -> "BitWriter":
        """Append the first ``nbits`` bits of ``data``."""
        if nbits == 0:
            return self
        value = int.from_bytes(data, "big") >> (8 * len(data) - nbits)
        return self._put(value, nbits)

    def _put(self, value: int, w: int) -> "BitWriter":
        if w == 0:
            return self
        self._acc = (self._acc << w) | value
        self._nacc += w
        if self._nacc >= 8:
            rem = self._nacc & 7
            nbytes = self._nacc >> 3
            self._buf += (self._acc >> rem).to_bytes(nbytes, "big")
            self._acc &= (1 << rem) - 1
            self._nacc = rem
        return self

    def __lshift__(self, value: int) -> "BitWriter":
        return self.write_unsigned(value)

    @property
    def bit_length(self) -> int:
        return 8 * len(self._buf) + self._nacc

    def getvalue(self) -> bytes:
        out = bytes(self._buf)
        if self._nacc:
            out += bytes([(self._acc << (8 - self._nacc)) & 0xFF])
        return out


class BitReader:
    def __init__(self, data: bytes, bit_offset: int = 0, bit_limit: int | None = None):
        self._data = bytes(data)
        self.pos = bit_offset
        self.limit = 8 * len(self._data) if bit_limit is None else bit_limit
        if self.limit > 8 * len(self._data):
            raise BitstreamError("bit limit beyond end of buffer")
        self.width = 0

    def set_width(self, width: int) -> "BitReader":
        if not 0 <= width <= 64:
            raise BitstreamError(f"field width {width} outside [0, 64]")
        self.width = width
        return self

    @property
    def remaining(self) -> int:
        return self.limit - self.pos

    def read_unsigned(self, width: int | None = None) -> int:
        return self.read_bits(self.width if width is None else width)

    def read_sign_magnitude(self, width: int) -> int:
        raw = self.read_bits(width)
        mag = raw & ((1 << (width - 1)) - 1)
        return -mag if raw >> (width - 1) else mag

    def read_bits(self, nbits: int) -> int:
        if nbits == 0:
            return 0
        end = self.pos + nbits
        if end > self.limit:
            raise BitstreamError(f"read of {nbits} bits past end of stream")
        first, last = self.pos >> 3, (end + 7) >> 3
        chunk = int.from_bytes(self._data[first:last], "big")
        chunk >>= 8 * last - end
        self.pos = end
        return chunk & ((1 << nbits) - 1)

    def read_bit(self) -> int:
        if self.pos >= self.limit:
            raise BitstreamError("read past end of stream")
        bit = (self._data[self.pos >> 3] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def check_padding(self) -> None:
        """Trailing bits up to the byte boundary must all be zero."""
        tail = (-self.pos) % 8
        if self.pos + tail != 8 * len(self._data) or (tail and self.read_bits(tail)):
            raise BitstreamError("trailing data or non-zero padding after stream end")
