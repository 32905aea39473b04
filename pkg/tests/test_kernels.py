import os
import subprocess
import sys

import numpy as np
import pytest

from qcarray import _kernels_py, kernels
from qcarray.bitstream import BitWriter
from qcarray.entropy import huffman_table

BACKENDS = kernels.backends()
ALL = list(BACKENDS.values())
ids = list(BACKENDS)


def test_compiled_backend_selected_when_built():
    assert "python" in BACKENDS
    if "cython" in BACKENDS:
        assert kernels.BACKEND == "cython"


def test_pure_env_var_forces_fallback():
    env = dict(os.environ, QCARRAY_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from qcarray import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def bitstring(data, n):
    return "".join(format(b, "08b") for b in data)[:n]


@pytest.mark.parametrize("k", ALL, ids=ids)
def test_pack_signmag_layout(k):
    data, n = k.pack_signmag(np.array([-6, 0, 5]), 4)
    assert (bitstring(data, n), n) == ("1110" "0000" "0101", 12)
    assert k.pack_signmag(np.zeros(5, np.int64), 0) == (b"", 0)
    with pytest.raises(k.KernelError):
        k.pack_signmag(np.array([8]), 4)
    with pytest.raises(k.KernelError):
        k.pack_signmag(np.array([1]), 0)


@pytest.mark.parametrize("k", ALL, ids=ids)
def test_unpack_at_bit_offset(k):
    data, n = k.pack_signmag(np.array([3, -2, -1, 0]), 3)
    w = BitWriter()
    w.write_bits(0b101, 3)
    w.write_bytes_bits(data, n)
    assert k.unpack_signmag(w.getvalue(), 3, 4, 3).tolist() == [3, -2, -1, 0]
    with pytest.raises(k.KernelError):
        k.unpack_signmag(data, 0, 6, 3)


@pytest.mark.parametrize("k", ALL, ids=ids)
def test_huffman_stream_layout(k):
    t = huffman_table(2)
    data, n = k.rle_huffman_encode(np.array([0, 0, 0, 1, -1]), t.codes, t.lengths, t.offset)
    # 0 x3 -> "0" + gamma(3)="011"; 1 x1 -> "11" + "1"; -1 x1 -> "10" + "1"
    assert bitstring(data, n) == "0011" "111" "101"


@pytest.mark.parametrize("k", ALL, ids=ids)
def test_huffman_decode_errors(k):
    t = huffman_table(3)
    args = (t.first_code, t.counts, t.first_index, t.symbols)
    data, n = k.rle_huffman_encode(np.array([1, 1, 2, -3]), t.codes, t.lengths, t.offset)
    assert k.rle_huffman_decode(data, 0, n, 4, *args).tolist() == [1, 1, 2, -3]
    with pytest.raises(k.KernelError):
        k.rle_huffman_decode(data, 0, n - 1, 4, *args)       # truncated
    with pytest.raises(k.KernelError):
        k.rle_huffman_decode(data, 0, n, 3, *args)           # run overflows
    with pytest.raises(k.KernelError):
        k.rle_huffman_decode(data + b"\x00", 0, n + 8, 4, *args)   # unused bits
    with pytest.raises(k.KernelError):
        k.rle_huffman_encode(np.array([4]), t.codes, t.lengths, t.offset)


@pytest.mark.skipif(len(ALL) < 2, reason="compiled backend not built")
def test_backends_agree(rng):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for _ in range(300):
        width = int(rng.integers(2, 17))
        top = (1 << (width - 1)) - 1
        n = int(rng.integers(1, 600))
        v = rng.integers(-top, top + 1, n)
        if rng.random() < 0.5:
            v = np.repeat(v[: n // 8 + 1], 8)[:n]
        a = py.pack_signmag(v, width)
        assert a == cy.pack_signmag(v, width)
        assert (cy.unpack_signmag(a[0], 0, n, width) == v).all()
        t = huffman_table(width)
        h = py.rle_huffman_encode(v, t.codes, t.lengths, t.offset)
        assert h == cy.rle_huffman_encode(v, t.codes, t.lengths, t.offset)
        args = (t.first_code, t.counts, t.first_index, t.symbols)
        assert (cy.rle_huffman_decode(h[0], 0, h[1], n, *args) == v).all()
        assert (py.rle_huffman_decode(h[0], 0, h[1], n, *args) == v).all()


@pytest.mark.parametrize("k", ALL, ids=ids)
def test_wide_fields(k):
    v = np.array([(1 << 40) - 3, -(1 << 35), 0, 7])
    data, n = k.pack_signmag(v, 42)
    assert (k.unpack_signmag(data, 0, 4, 42) == v).all()
    assert (_kernels_py.unpack_signmag(data, 0, 4, 42) == v).all()
