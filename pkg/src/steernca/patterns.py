"""Synthetic demo/test targets.

`pinwheel` is the workhorse: a two-tone disk split into four sectors of
unequal angular size (60/60/120/120 degrees, alternating hues).  The uneven
alternation means no mirror of the pattern equals any rotation of it, so the
pattern is chiral, while staying easy to grow at desk scale.  `chiral_swirl`
is a larger, smoother chiral image for loss tests.  All generators return
premultiplied float RGBA.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .seeding import hue_to_rgb


def _soft_disk(n, radius, softness=1.0):
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    c = (n - 1) / 2.0
    r = np.hypot(yy - c, xx - c)
    return np.clip((radius - r) / softness, 0.0, 1.0)


def pinwheel(size: int = 24, hue_a: float = 30.0, hue_b: float = 210.0,
             radius: float | None = None) -> np.ndarray:
    """Chiral two-tone sector disk, premultiplied RGBA (size, size, 4)."""
    if radius is None:
        radius = 0.38 * size
    n = size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    c = (n - 1) / 2.0
    phi = np.arctan2(yy - c, xx - c) % (2 * np.pi)
    alpha = _soft_disk(n, radius)

    # sectors (in degrees): A[0,60) B[60,120) A[120,240) B[240,360)
    deg = np.degrees(phi)
    use_b = ((deg >= 60) & (deg < 120)) | (deg >= 240)
    rgb_a, rgb_b = hue_to_rgb(hue_a), hue_to_rgb(hue_b)
    rgb = np.where(use_b[..., None], rgb_b, rgb_a)
    # shade radially so rotation alignment is unambiguous under blur
    shade = 0.55 + 0.45 * np.clip(np.hypot(yy - c, xx - c) / radius, 0, 1)
    out = np.concatenate([rgb * shade[..., None], alpha[..., None]], axis=2)
    out[..., :3] *= out[..., 3:4]
    return out


def chiral_swirl(size: int = 48, turns: float = 1.25) -> np.ndarray:
    """A smooth spiral-armed blob; mirror images cannot be rotated onto it."""
    n = size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    c = (n - 1) / 2.0
    r = np.hypot(yy - c, xx - c) / (0.45 * n)
    phi = np.arctan2(yy - c, xx - c)
    arm = 0.5 + 0.5 * np.cos(3 * phi - 2 * np.pi * turns * r)
    body = np.clip(1.2 - r, 0, 1) ** 1.5
    alpha = np.clip(body * (0.35 + 0.65 * arm), 0, 1)
    rgb = np.stack([
        alpha * (0.5 + 0.5 * np.cos(phi - 2 * r)),
        alpha * (0.5 + 0.5 * np.sin(2 * phi + r)),
        alpha * (1.0 - 0.5 * arm),
    ], axis=2)
    out = np.concatenate([np.clip(rgb, 0, 1), alpha[..., None]], axis=2)
    out[..., :3] *= out[..., 3:4]
    return out


def smooth_blobs(size: int, rng: np.random.Generator, blobs: int = 5,
                 spread: float = 0.15, min_sigma: float = 0.06,
                 max_sigma: float = 0.12) -> np.ndarray:
    """Random smooth premultiplied RGBA image, content near the center."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((size, size, 4))
    for _ in range(blobs):
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0, spread)
        cy, cx = 0.5 + rad * np.sin(ang), 0.5 + rad * np.cos(ang)
        s = rng.uniform(min_sigma, max_sigma)
        g = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
        img += g[..., None] * rng.uniform(0.2, 1.0, size=4)
    img = np.clip(img, 0, 1)
    img[..., :3] *= img[..., 3:4]
    return img


GENERATORS = {"pinwheel": pinwheel, "swirl": chiral_swirl}


def save_rgba_png(path, rgba: np.ndarray) -> None:
    """Write premultiplied float RGBA to an 8-bit straight-alpha PNG."""
    rgba = np.clip(rgba, 0.0, 1.0)
    a = rgba[..., 3:4]
    straight = np.where(a > 1e-6, rgba[..., :3] / np.maximum(a, 1e-6), 0.0)
    out = np.concatenate([np.clip(straight, 0, 1), a], axis=2)
    Image.fromarray((out * 255).round().astype(np.uint8), "RGBA").save(
        path, format="PNG"
    )
