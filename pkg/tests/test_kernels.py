"""Backend kernels against scipy oracles, and backend interchangeability."""

import numpy as np
import pytest

from steernca import kernels
from steernca.kernels import numpy_backend

from util import conv3x3_oracle, maxpool3x3_oracle

DTYPES = (np.float32, np.float64)


@pytest.mark.parametrize("dtype", DTYPES)
def test_conv3x3_matches_scipy(rng, dtype):
    x = rng.standard_normal((3, 9, 7, 5)).astype(dtype)
    k = rng.standard_normal((3, 3)).astype(dtype)
    got = kernels.conv3x3(x, k)
    want = conv3x3_oracle(x, k.astype(np.float64))
    tol = 1e-5 if dtype == np.float32 else 1e-12
    assert got.dtype == dtype
    np.testing.assert_allclose(got, want, atol=tol)


@pytest.mark.parametrize("dtype", DTYPES)
def test_maxpool3x3_matches_scipy(rng, dtype):
    a = rng.standard_normal((2, 8, 6)).astype(dtype)
    a[0, :2] = np.abs(a[0, :2])  # cover positive borders too
    got = kernels.maxpool3x3(a)
    want = maxpool3x3_oracle(a.astype(np.float64))
    np.testing.assert_allclose(got, want, atol=0)


def test_backends_agree(rng):
    speedups = pytest.importorskip("steernca.kernels._speedups")
    for dtype in DTYPES:
        x = rng.standard_normal((2, 12, 11, 4)).astype(dtype)
        k = rng.standard_normal((3, 3)).astype(dtype)
        a = numpy_backend.conv3x3(x, k)
        b = speedups.conv3x3(x, k)
        np.testing.assert_allclose(a, b, rtol=0,
                                   atol=0 if dtype == np.float64 else 1e-7)
        pa = numpy_backend.maxpool3x3(x[:, :, :, 0].copy())
        pb = speedups.maxpool3x3(np.ascontiguousarray(x[:, :, :, 0]))
        np.testing.assert_array_equal(pa, pb)


def test_compiled_backend_is_active():
    # the build in this repo compiles the extension; fallback still must import
    assert kernels.BACKEND in ("compiled", "numpy")
    assert callable(numpy_backend.conv3x3)


def test_maxpool_border_reads_zero():
    a = np.full((1, 4, 4), -2.0)
    out = kernels.maxpool3x3(a)
    assert out[0, 0, 0] == 0.0          # padding wins over negatives
    assert out[0, 1, 1] == -2.0         # interior ignores padding
