"""Kernel backend selection.

The compiled extension is used when it imports; set ``QCARRAY_PURE=1`` to
force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("QCARRAY_PURE"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
pack_signmag = _impl.pack_signmag
unpack_signmag = _impl.unpack_signmag
rle_huffman_encode = _impl.rle_huffman_encode
rle_huffman_decode = _impl.rle_huffman_decode
KernelError = (_kernels_py.KernelError,) if _impl is _kernels_py else (
    _kernels_py.KernelError, _impl.KernelError)


def backends() -> dict:
    """All importable backends by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found


def use(name: str) -> None:
    """Switch the active backend for this process (benchmarks, parity checks)."""
    global BACKEND, pack_signmag, unpack_signmag, rle_huffman_encode, rle_huffman_decode, KernelError
    impl = backends()[name]
    BACKEND = impl.BACKEND
    pack_signmag = impl.pack_signmag
    unpack_signmag = impl.unpack_signmag
    rle_huffman_encode = impl.rle_huffman_encode
    rle_huffman_decode = impl.rle_huffman_decode
    KernelError = tuple({_kernels_py.KernelError, impl.KernelError})
