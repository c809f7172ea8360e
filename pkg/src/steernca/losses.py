"""Training objectives.

Two regimes: plain pixel L2 against a fixed target alignment (two-seed
training), and a rotation-invariant loss that polar-transforms the grown
pattern and takes the minimum ring-weighted squared distance over every
cyclic shift of the target's angle axis (single-seed training).  The shift
search runs as a frequency-domain cross-correlation; `rotinv_loss_bruteforce`
computes the identical quantity by explicit shifting and exists as the
oracle for the FFT path.

The minimum is a hard selection: gradients flow only through the chosen
rotation, with the rotated target held constant.  Auxiliary channels join
the same selection; the radial (cos, sin) pair is rotated as a vector field
before comparison.  Per-sample values are

    (mean sq diff over RGBA) + lambda_aux * (sum of per-aux-channel
    mean sq diffs) / 4

so that with no aux channels the value is the plain RGBA mean squared error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ShapeError
from .targets import TargetPattern, sharpen


@dataclass
class LossReport:
    """Loss value plus the differentiable scalar that produced it.

    `value` is the mean of `per_sample`.  The rotation fields are filled by
    the rotation-searching losses only: `per_sample_rotation` holds each
    sample's selected target rotation in [0, 2pi), and `best_rotation` the
    rotation of the lowest-loss sample.
    """

    value: float
    per_sample: np.ndarray
    tensor: Tensor | None = None
    best_rotation: float | None = None
    per_sample_rotation: np.ndarray | None = None


def _channel_weights(n_aux: int, lambda_aux: float) -> np.ndarray:
    return np.array([1.0] * 4 + [float(lambda_aux)] * n_aux)


def _compare_stack(state: Tensor, target: TargetPattern,
                   n_aux: int) -> Tensor:
    if state.values.ndim != 4:
        raise ShapeError(f"state must be (B,H,W,C), got {state.shape}")
    if state.shape[1:3] != target.shape:
        raise ShapeError(
            f"state grid {state.shape[1:3]} does not match target {target.shape}"
        )
    if state.shape[3] < 4 + n_aux:
        raise ShapeError(
            f"state has {state.shape[3]} channels, needs {4 + n_aux} to compare"
        )
    return ad.channels(state, 0, 4 + n_aux)


def l2_loss(state, target: TargetPattern, lambda_aux: float = 1.0) -> LossReport:
    """Pixelwise squared error against the target's training alignment.

    Both sides are sharpened by the target's configured amount before the
    comparison; aux channels (when the target carries them) are weighted by
    lambda_aux.
    """
    state = state if isinstance(state, Tensor) else Tensor(np.asarray(state))
    n_aux = target.aux_spec.n_channels
    grown = _compare_stack(state, target, n_aux)
    grown = sharpen(grown, target.sharpen_amount)
    ref = target.planar_sharp
    if ref is None:
        ref = sharpen(target.stack(), target.sharpen_amount)
    ref = ref.astype(grown.dtype)

    b, h, w, c = grown.shape
    cw = _channel_weights(n_aux, lambda_aux) / (4.0 * h * w)
    diff = grown - np.broadcast_to(ref[None], grown.shape)
    weighted = diff * diff * np.broadcast_to(cw.astype(grown.dtype), diff.shape)
    tensor = ad.sum_all(weighted) * (1.0 / b)

    d = diff.values.astype(np.float64)
    per_sample = (d * d * cw).sum(axis=(1, 2, 3))
    return LossReport(float(per_sample.mean()), per_sample, tensor)


def _shift_distances_fft(a: np.ndarray, target: TargetPattern,
                         cw: np.ndarray) -> np.ndarray:
    """Weighted squared distance to the target polar image per cyclic shift.

    a: (B, R, A, C) polar stack of the grown pattern.  Uses
    ||a - shift(b,k)||^2 = ||a||^2 + ||b||^2 - 2 corr_k(a, b) with the
    correlation computed along the angle axis in the frequency domain.
    """
    rw = target.radial_weights[None, :, None, None]
    n_bins = a.shape[2]
    c = a.shape[3]
    v = target.polar_fft[:, :, :c]                     # conj rfft of target
    u = np.fft.rfft(a * rw, axis=2)                    # (B, R, F, C)
    corr = np.fft.irfft((u * v[None]).sum(axis=1), n=n_bins, axis=1)

    na = (a * a * rw).sum(axis=(1, 2))                 # (B, C)
    nb = target.polar_sq[:c]
    dist = (na + nb)[:, None, :] - 2.0 * corr          # (B, A, C)
    total = (dist * cw).sum(axis=2)

    if target.aux_spec.kind == "binary+radial" and c == 7:
        # the radial pair is rotated by the candidate angle before comparing
        ci, cj = 5, 6
        delta = 2 * np.pi * np.arange(n_bins) / n_bins
        cd, sd = np.cos(delta)[None, :], np.sin(delta)[None, :]
        cross_sc = np.fft.irfft((u[..., cj] * v[None, ..., ci]).sum(axis=1),
                                n=n_bins, axis=1)      # corr(a_sin, b_cos)
        cross_cs = np.fft.irfft((u[..., ci] * v[None, ..., cj]).sum(axis=1),
                                n=n_bins, axis=1)      # corr(a_cos, b_sin)
        corr_vec = (cd * (corr[..., ci] + corr[..., cj])
                    + sd * (cross_sc - cross_cs))
        vec_dist = ((na[:, None, ci] + na[:, None, cj] + nb[ci] + nb[cj])
                    - 2.0 * corr_vec)
        total += cw[ci] * (vec_dist - dist[..., ci] - dist[..., cj])
    return total


def _rotated_target_polar(target: TargetPattern, shift: int, n_channels: int,
                          with_vector: bool) -> np.ndarray:
    """Target polar stack cyclically shifted by `shift` angle bins.

    Scalar channels just shift; the radial (cos, sin) pair is additionally
    rotated by the candidate angle.
    """
    rolled = np.roll(target.polar[:, :, :n_channels], shift, axis=1)
    if with_vector and n_channels == 7:
        delta = shift * target.plan.bin_angle
        c, s = np.cos(delta), np.sin(delta)
        bc, bs = rolled[:, :, 5].copy(), rolled[:, :, 6].copy()
        rolled[:, :, 5] = bc * c - bs * s
        rolled[:, :, 6] = bs * c + bc * s
    return rolled


def _shift_distances_brute(a: np.ndarray, target: TargetPattern,
                           cw: np.ndarray) -> np.ndarray:
    """Oracle for `_shift_distances_fft`: explicit shift-and-subtract."""
    b, r, n_bins, c = a.shape
    rw = target.radial_weights[None, :, None, None]
    with_vec = target.aux_spec.kind == "binary+radial" and c == 7
    out = np.empty((b, n_bins))
    for k in range(n_bins):
        ref = _rotated_target_polar(target, k, c, with_vec)
        d = a - ref[None]
        out[:, k] = (d * d * rw * cw).sum(axis=(1, 2, 3))
    return out


def _rotinv(state, target: TargetPattern, lambda_aux: float | None,
            method: str) -> LossReport:
    state = state if isinstance(state, Tensor) else Tensor(np.asarray(state))
    if target.polar_fft is None or target.plan is None:
        raise ContractError(
            "target has no polar tables; run targets.prepare_target first"
        )
    n_aux = 0 if lambda_aux is None else target.aux_spec.n_channels
    lam = 0.0 if lambda_aux is None else float(lambda_aux)
    n_compare = 4 + n_aux
    n_bins = target.plan.angle_bins

    grown = _compare_stack(state, target, n_aux)
    grown = sharpen(grown, target.sharpen_amount)
    polar = ad.polar_sample(grown, target.plan)        # (B, R, A, C)

    cw = _channel_weights(n_aux, lam) / (4.0 * n_bins)
    a64 = polar.values.astype(np.float64)
    if method == "fft":
        dists = _shift_distances_fft(a64, target, cw)
    else:
        dists = _shift_distances_brute(a64, target, cw)
    shifts = np.argmin(dists, axis=1)                  # first index wins ties
    per_sample = dists[np.arange(len(shifts)), shifts]
    rotations = shifts * target.plan.bin_angle

    with_vec = target.aux_spec.kind == "binary+radial" and n_compare == 7
    ref = np.stack(
        [_rotated_target_polar(target, int(k), n_compare, with_vec)
         for k in shifts],
        axis=0,
    ).astype(polar.dtype)
    rw = target.radial_weights[None, :, None, None]
    wts = (rw * cw[None, None, None, :]).astype(polar.dtype)
    diff = polar - ref
    weighted = diff * diff * np.broadcast_to(wts, diff.shape)
    tensor = ad.sum_all(weighted) * (1.0 / polar.shape[0])

    best = int(np.argmin(per_sample))
    return LossReport(
        float(per_sample.mean()), per_sample, tensor,
        best_rotation=float(rotations[best]),
        per_sample_rotation=rotations.astype(np.float64),
    )


def rotinv_loss_fft(state, target: TargetPattern) -> LossReport:
    """Rotation-invariant RGBA loss, shift search in the frequency domain."""
    return _rotinv(state, target, None, "fft")


def rotinv_loss_bruteforce(state, target: TargetPattern) -> LossReport:
    """Same contract as rotinv_loss_fft via exhaustive explicit shifts."""
    return _rotinv(state, target, None, "brute")


def total_loss(state, target: TargetPattern, lambda_aux: float = 1.0,
               method: str = "fft") -> LossReport:
    """Rotation-invariant loss over RGBA plus weighted auxiliary channels.

    All channels share one rotation selection (the weighted joint minimum);
    with lambda_aux = 0 this reduces to rotinv_loss_fft.
    """
    return _rotinv(state, target, lambda_aux, method)
