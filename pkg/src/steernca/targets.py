"""Target ingestion and preprocessing.

Loads an RGBA PNG into a premultiplied float image, optionally synthesizes
auxiliary supervision channels (a binary silhouette, and a radial (cos, sin)
direction field about the pattern centroid), and resamples onto a polar
(radius, angle) lattice.  The polar representation of the sharpened channel
stack, its FFT along the angle axis, and per-ring area weights are
precomputed once so that the rotation-searching loss is cheap per sample.

Angles use atan2(d_row, d_col) throughout, matching `model` and `seeding`:
polar column k samples the direction (cos, sin) of angle 2*pi*k / angle_bins.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import ContractError, TargetFormatError

K_BLUR = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0

AUX_KINDS = ("none", "binary", "binary+radial")
AUX_CHANNELS = {"none": 0, "binary": 1, "binary+radial": 3}


@dataclass(frozen=True)
class AuxSpec:
    kind: str = "none"

    def __post_init__(self):
        if self.kind not in AUX_KINDS:
            raise ContractError(f"aux kind must be one of {AUX_KINDS}")

    @property
    def n_channels(self) -> int:
        return AUX_CHANNELS[self.kind]


@dataclass
class PolarPlan:
    """Precomputed bilinear sampling lattice for one grid geometry.

    `flat_index` holds, for each (radius bin, angle bin), the four flattened
    (row*W + col) source pixels; `tap_weights` their bilinear weights (zero
    for out-of-image taps).  Row r samples radius r * r_max / radius_bins
    from the center.
    """

    grid_shape: tuple[int, int]
    center: tuple[float, float]            # (row, col)
    radius_bins: int
    angle_bins: int
    r_max: float
    flat_index: np.ndarray                 # (R, A, 4) int64
    tap_weights: np.ndarray                # (R, A, 4) float64
    radial_weights: np.ndarray             # (R,) float64, sums to 1

    @property
    def bin_angle(self) -> float:
        return 2 * np.pi / self.angle_bins


def build_polar_plan(grid_shape, center, radius_bins, angle_bins,
                     r_max=None) -> PolarPlan:
    if radius_bins < 8 or angle_bins < 8:
        raise ContractError("need at least 8 radius and angle bins")
    h, w = grid_shape
    cy, cx = center
    if r_max is None:
        r_max = 0.5 * float(np.hypot(h, w))
    radii = np.arange(radius_bins) * (r_max / radius_bins)
    angles = 2 * np.pi * np.arange(angle_bins) / angle_bins
    yy = cy + radii[:, None] * np.sin(angles)[None, :]
    xx = cx + radii[:, None] * np.cos(angles)[None, :]

    y0 = np.floor(yy).astype(np.int64)
    x0 = np.floor(xx).astype(np.int64)
    fy = yy - y0
    fx = xx - x0
    corners = [(y0, x0, (1 - fy) * (1 - fx)), (y0, x0 + 1, (1 - fy) * fx),
               (y0 + 1, x0, fy * (1 - fx)), (y0 + 1, x0 + 1, fy * fx)]
    idx = np.zeros((radius_bins, angle_bins, 4), dtype=np.int64)
    wts = np.zeros((radius_bins, angle_bins, 4), dtype=np.float64)
    for t, (ys, xs, ws) in enumerate(corners):
        inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        idx[:, :, t] = np.where(inside, ys * w + xs, 0)
        wts[:, :, t] = np.where(inside, ws, 0.0)

    rw = radii.astype(np.float64)
    rw /= rw.sum()
    return PolarPlan((h, w), (cy, cx), radius_bins, angle_bins, float(r_max),
                     idx, wts, rw)


@dataclass
class TargetPattern:
    """A target image plus everything the losses need precomputed.

    `rgba` and `aux` are the stored, unsharpened targets; the polar fields
    describe the sharpened channel stack (sharpening is a loss-path stage).
    """

    rgba: np.ndarray                        # (H, W, 4) premultiplied
    aux: np.ndarray | None = None           # (H, W, k)
    aux_spec: AuxSpec = field(default_factory=AuxSpec)
    center: tuple[float, float] | None = None
    sharpen_amount: float = 0.0
    planar_sharp: np.ndarray | None = None  # (H, W, 4+k) sharpened stack
    plan: PolarPlan | None = None
    polar: np.ndarray | None = None         # (R, A, 4+k) of the sharpened stack
    polar_fft: np.ndarray | None = None     # (R, F, 4+k) conj rfft along angle
    polar_sq: np.ndarray | None = None      # (4+k,) ring-weighted sum of squares
    radial_weights: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgba.shape[:2]

    @property
    def n_compare(self) -> int:
        return 4 + self.aux_spec.n_channels

    def stack(self) -> np.ndarray:
        if self.aux is None or self.aux.shape[2] == 0:
            return self.rgba
        return np.concatenate([self.rgba, self.aux], axis=2)


def ensure_premultiplied(rgba: np.ndarray) -> np.ndarray:
    """Premultiply RGB by alpha unless the image already is premultiplied.

    Idempotent: an image whose RGB never exceeds its alpha is returned
    unchanged.
    """
    rgb, a = rgba[..., :3], rgba[..., 3:4]
    if np.all(rgb <= a + 1e-6):
        return rgba
    out = rgba.copy()
    out[..., :3] = rgb * a
    return out


def load_target(source, pad: int = 0) -> TargetPattern:
    """Load an 8-bit RGBA PNG into a premultiplied [0,1] float image.

    `source` is a path or PNG bytes; the result is zero-padded by `pad`
    cells on every side.  Non-RGBA or unreadable files raise
    TargetFormatError.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    try:
        with Image.open(source) as img:
            if img.format != "PNG":
                raise TargetFormatError(f"expected a PNG file, got {img.format}")
            if img.mode != "RGBA":
                raise TargetFormatError(
                    f"expected an RGBA image, got mode {img.mode}"
                )
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise TargetFormatError(f"not a readable image: {exc}") from exc
    arr = ensure_premultiplied(arr)
    if pad:
        h, w, _ = arr.shape
        out = np.zeros((h + 2 * pad, w + 2 * pad, 4), dtype=arr.dtype)
        out[pad:pad + h, pad:pad + w] = arr
        arr = out
    return TargetPattern(rgba=arr)


def alpha_centroid(rgba: np.ndarray) -> tuple[float, float]:
    """Alpha-weighted centroid (row, col); grid center for empty images."""
    a = rgba[..., 3]
    total = a.sum()
    if total <= 0:
        return ((rgba.shape[0] - 1) / 2.0, (rgba.shape[1] - 1) / 2.0)
    rows = (a.sum(axis=1) * np.arange(rgba.shape[0])).sum() / total
    cols = (a.sum(axis=0) * np.arange(rgba.shape[1])).sum() / total
    return (float(rows), float(cols))


def sharpen(img, amount: float):
    """Unsharp mask: img + amount * (img - blur3x3(img)).

    Accepts an (H, W, C) or (B, H, W, C) array, or a Tensor (differentiable
    path); blur is the normalized 3x3 binomial kernel with zero padding.
    """
    if amount < 0:
        raise ContractError("sharpen amount must be >= 0")
    if isinstance(img, Tensor):
        if amount == 0:
            return img
        blur = ad.conv3x3(img, K_BLUR)
        return img + (img - blur) * float(amount)
    img = np.asarray(img)
    if amount == 0:
        return img.copy()
    squeeze = img.ndim == 3
    batch = img[None] if squeeze else img
    blur = kernels.conv3x3(batch.astype(np.float64, copy=False), K_BLUR)
    out = batch + amount * (batch - blur)
    return out[0] if squeeze else out


def make_aux_targets(rgba: np.ndarray, spec: AuxSpec) -> np.ndarray:
    """Auxiliary supervision channels for a premultiplied RGBA target.

    binary: 1 where alpha > 0.1.  radial: (cos, sin) of the polar angle
    about the alpha centroid, masked by the binary channel — a vector field
    the loss rotates alongside rotation candidates.
    """
    h, w = rgba.shape[:2]
    if spec.kind == "none":
        return np.zeros((h, w, 0), dtype=np.float64)
    binary = (rgba[..., 3] > 0.1).astype(np.float64)
    if spec.kind == "binary":
        return binary[..., None]
    cy, cx = alpha_centroid(rgba)
    phi = np.arctan2(np.arange(h)[:, None] - cy, np.arange(w)[None, :] - cx)
    return np.stack([binary, np.cos(phi) * binary, np.sin(phi) * binary], axis=2)


def polar_transform(img: np.ndarray, radius_bins: int, angle_bins: int,
                    center=None):
    """Resample an (H, W, C) image onto a polar lattice.

    Returns (polar (R, A, C), radial_weights (R,)).  The center defaults to
    the alpha centroid for 4-channel images, the geometric center otherwise;
    samples outside the image are zero.  Ring weights are proportional to
    the ring radius and sum to one.
    """
    img = np.asarray(img, dtype=np.float64)
    if center is None:
        if img.shape[2] == 4:
            center = alpha_centroid(img)
        else:
            center = ((img.shape[0] - 1) / 2.0, (img.shape[1] - 1) / 2.0)
    plan = build_polar_plan(img.shape[:2], center, radius_bins, angle_bins)
    polar = ad.polar_sample(Tensor(img[None]), plan).values[0]
    return polar, plan.radial_weights


def prepare_target(pattern: TargetPattern, aux: AuxSpec, sharpen_amount: float,
                   radius_bins: int | None = None,
                   angle_bins: int = 256) -> TargetPattern:
    """Fill in aux channels, the polar plan, and the frequency tables.

    angle_bins must be a power of two.  radius_bins defaults to the image
    half-diagonal, giving roughly one-pixel rings.
    """
    if angle_bins < 8 or angle_bins & (angle_bins - 1):
        raise ContractError("angle_bins must be a power of two >= 8")
    h, w = pattern.shape
    if radius_bins is None or radius_bins <= 0:
        radius_bins = max(8, int(np.ceil(0.5 * np.hypot(h, w))))
    pattern.aux_spec = aux
    pattern.aux = make_aux_targets(pattern.rgba, aux)
    pattern.center = alpha_centroid(pattern.rgba)
    pattern.sharpen_amount = float(sharpen_amount)
    stack = pattern.stack()
    pattern.planar_sharp = sharpen(stack, sharpen_amount)
    pattern.plan = build_polar_plan((h, w), pattern.center, radius_bins,
                                    angle_bins)
    pattern.polar = ad.polar_sample(
        Tensor(pattern.planar_sharp[None].astype(np.float64)), pattern.plan
    ).values[0]
    pattern.radial_weights = pattern.plan.radial_weights
    # conj rfft per ring and channel: the loss correlates against these
    pattern.polar_fft = np.conj(np.fft.rfft(pattern.polar, axis=1))
    rw = pattern.radial_weights[:, None, None]
    pattern.polar_sq = (rw * pattern.polar ** 2).sum(axis=(0, 1))
    return pattern
