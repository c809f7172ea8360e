"""Pure-numpy implementations of the hot grid kernels.

Shapes follow the package-wide (batch, height, width, channels) layout.
Everything outside the grid reads as zero (empty space), for the convolution
and the max-pool alike.  Tap order matches the compiled backend so that both
produce the same floating-point accumulation sequence.
"""

import numpy as np


def conv3x3(x, kernel):
    """Depthwise 3x3 cross-correlation with zero padding.

    x: (B, H, W, C) float array; kernel: (3, 3), applied to every channel.
    """
    b, h, w, c = x.shape
    padded = np.zeros((b, h + 2, w + 2, c), dtype=x.dtype)
    padded[:, 1:-1, 1:-1, :] = x
    out = np.zeros_like(x)
    for u in range(3):
        for v in range(3):
            k = kernel[u, v]
            if k != 0.0:
                out += x.dtype.type(k) * padded[:, u:u + h, v:v + w, :]
    return out


def maxpool3x3(a):
    """3x3 max-pool of a (B, H, W) array, zero padding at the borders."""
    b, h, w = a.shape
    padded = np.zeros((b, h + 2, w + 2), dtype=a.dtype)
    padded[:, 1:-1, 1:-1] = a
    out = padded[:, 0:h, 0:w].copy()
    for u in range(3):
        for v in range(3):
            if u == 0 and v == 0:
                continue
            np.maximum(out, padded[:, u:u + h, v:v + w], out=out)
    return out
