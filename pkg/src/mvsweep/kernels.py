"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
used otherwise. MMVS_BACKEND=numpy|cython forces a specific backend
(forcing cython raises if the extension is missing).
"""
import os

from mvsweep import _kernels_np


def _load(name):
    if name == "numpy":
        return _kernels_np
    if name == "cython":
        from mvsweep import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown kernel backend {name!r} (expected 'numpy' or 'cython')")


def available_backends():
    names = ["numpy"]
    try:
        _load("cython")
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


_requested = os.environ.get("MMVS_BACKEND", "auto")
if _requested == "auto":
    try:
        _impl = _load("cython")
    except ImportError:
        _impl = _kernels_np
else:
    _impl = _load(_requested)

BACKEND = _impl.NAME
im2col = _impl.im2col
col2im = _impl.col2im
warp_bilinear = _impl.warp_bilinear
conv_out_size = _impl.conv_out_size


def get_backend(name):
    """Return the kernel module for an explicit backend name (benchmarks/tests)."""
    return _load(name)
