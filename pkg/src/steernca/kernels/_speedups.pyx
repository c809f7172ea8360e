# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid kernels: depthwise 3x3 correlation and 3x3 max-pool.

Semantics mirror numpy_backend exactly (zero padding, same tap order) so the
two backends are interchangeable.
"""

import numpy as np

cimport cython


ctypedef fused real:
    float
    double


@cython.boundscheck(False)
@cython.wraparound(False)
def conv3x3(real[:, :, :, ::1] x, real[:, ::1] kernel):
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    if real is float:
        out_np = np.zeros((B, H, W, C), dtype=np.float32)
    else:
        out_np = np.zeros((B, H, W, C), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, i, j, c, u, v, ii, jj
    cdef real kv
    for b in range(B):
        for i in range(H):
            for j in range(W):
                for u in range(3):
                    ii = i + u - 1
                    if ii < 0 or ii >= H:
                        continue
                    for v in range(3):
                        jj = j + v - 1
                        if jj < 0 or jj >= W:
                            continue
                        kv = kernel[u, v]
                        if kv != 0.0:
                            for c in range(C):
                                out[b, i, j, c] += kv * x[b, ii, jj, c]
    return out_np


@cython.boundscheck(False)
@cython.wraparound(False)
def maxpool3x3(real[:, :, ::1] a):
    # separable: column-window maxima per row, then row-window maxima.
    # zero padding: border cells fold a 0 into their max.
    cdef Py_ssize_t B = a.shape[0], H = a.shape[1], W = a.shape[2]
    if real is float:
        out_np = np.empty((B, H, W), dtype=np.float32)
        scratch_np = np.empty((H, W), dtype=np.float32)
    else:
        out_np = np.empty((B, H, W), dtype=np.float64)
        scratch_np = np.empty((H, W), dtype=np.float64)
    cdef real[:, :, ::1] out = out_np
    cdef real[:, ::1] m1 = scratch_np
    cdef Py_ssize_t b, i, j
    cdef real m
    for b in range(B):
        for i in range(H):
            for j in range(1, W - 1):
                m = a[b, i, j - 1]
                if a[b, i, j] > m:
                    m = a[b, i, j]
                if a[b, i, j + 1] > m:
                    m = a[b, i, j + 1]
                m1[i, j] = m
            if W > 1:
                m1[i, 0] = max(<real>0.0, max(a[b, i, 0], a[b, i, 1]))
                m1[i, W - 1] = max(<real>0.0, max(a[b, i, W - 2], a[b, i, W - 1]))
            else:
                m1[i, 0] = max(<real>0.0, a[b, i, 0])
        for i in range(H):
            for j in range(W):
                m = m1[i, j]
                if i > 0 and m1[i - 1, j] > m:
                    m = m1[i - 1, j]
                if i < H - 1 and m1[i + 1, j] > m:
                    m = m1[i + 1, j]
                if (i == 0 or i == H - 1) and m < 0.0:
                    m = 0.0
                out[b, i, j] = m
    return out_np
