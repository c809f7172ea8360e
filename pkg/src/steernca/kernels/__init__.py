"""Grid kernels with a compiled fast path and a pure-numpy fallback.

The backend is chosen once at import time.  Set STEERNCA_KERNELS=numpy or
STEERNCA_KERNELS=compiled to force a backend; the default ("auto") prefers the
compiled extension and silently falls back to numpy when it is not built.
"""

import os

import numpy as np

from . import numpy_backend

_choice = os.environ.get("STEERNCA_KERNELS", "auto")
if _choice not in ("auto", "compiled", "numpy"):
    raise ValueError(f"STEERNCA_KERNELS must be auto|compiled|numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"


def _as_float(a):
    a = np.ascontiguousarray(a)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    return a


def conv3x3(x, kernel):
    """Depthwise 3x3 cross-correlation of (B,H,W,C) with zero padding."""
    x = _as_float(x)
    kernel = np.ascontiguousarray(kernel, dtype=x.dtype)
    if kernel.shape != (3, 3):
        raise ValueError(f"kernel must be 3x3, got {kernel.shape}")
    return _impl.conv3x3(x, kernel)


def maxpool3x3(a):
    """3x3 max-pool of (B,H,W); outside the grid reads as zero."""
    return _impl.maxpool3x3(_as_float(a))
