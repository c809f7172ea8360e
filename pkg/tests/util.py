"""Shared test helpers: independent oracles built on scipy, state builders."""

import numpy as np
from scipy import ndimage

from steernca.model import alive_mask


def rotate_about(img, radians, center):
    """Move image features from angle phi to phi + radians about a point.

    Bilinear, zero fill; angles follow the package convention
    atan2(d_row, d_col).  Independent of the package's own resampling code.
    """
    c, s = np.cos(radians), np.sin(radians)
    matrix = np.array([[c, -s], [s, c]])    # inverse map
    center = np.asarray(center, dtype=np.float64)
    offset = center - matrix @ center
    return np.stack([
        ndimage.affine_transform(img[..., k], matrix, offset=offset, order=1,
                                 mode="constant", cval=0.0)
        for k in range(img.shape[2])
    ], axis=2)


def conv3x3_oracle(x, kernel):
    """scipy cross-correlation with zero padding, per batch and channel."""
    out = np.zeros_like(x, dtype=np.float64)
    for b in range(x.shape[0]):
        for c in range(x.shape[3]):
            out[b, :, :, c] = ndimage.correlate(
                x[b, :, :, c].astype(np.float64), kernel,
                mode="constant", cval=0.0,
            )
    return out


def maxpool3x3_oracle(a):
    pooled = np.stack([
        ndimage.maximum_filter(plane, size=3, mode="constant", cval=0.0)
        for plane in a
    ])
    return pooled


def calibrated_params(cfg, rng, probe_states, max_update=0.05):
    """Random params rescaled so one step moves no value more than max_update.

    Keeps the alive set fixed across a step for states built by
    `stable_alive_state` (alpha margins 0.3/0.1), which makes the
    rotation-equivariance transform exact on the steering channel.
    """
    import numpy as np
    from steernca import autodiff as ad
    from steernca.model import ModelParams, perceive

    params = ModelParams.initialize(cfg, rng)
    params.w1 = rng.standard_normal(params.w1.shape).astype(params.w1.dtype)
    peak = 0.0
    for s in probe_states:
        p = perceive(ad.Tensor(s), cfg)
        h = ad.relu(ad.dense(p, params.w0, params.b0))
        ds = ad.dense(h, params.w1)
        peak = max(peak, float(np.abs(ds.values).max()))
    if peak > 0:
        params.w1 *= max_update / peak
    return params


def stable_alive_state(rng, channels, steering_index, size=11, batch=1,
                       angle_scale=6.0):
    """Random alive state whose alive set survives small updates.

    Alpha is either exactly zero or in [0.4, 0.9], so threshold crossings
    need an update of magnitude > 0.3; dead cells are zeroed to satisfy the
    state invariant.
    """
    s = np.zeros((batch, size, size, channels))
    blob = np.zeros((size, size), dtype=bool)
    lo, hi = size // 4, size - size // 4
    blob[lo:hi, lo:hi] = rng.random((hi - lo, hi - lo)) < 0.8
    for b in range(batch):
        s[b, blob, :] = rng.random((blob.sum(), channels)) - 0.2
        s[b, :, :, 3] = 0.0
        s[b, blob, 3] = 0.4 + 0.5 * rng.random(blob.sum())
        s[b, blob, steering_index] = rng.random(blob.sum()) * angle_scale
    return s * alive_mask(s, 0.1)
