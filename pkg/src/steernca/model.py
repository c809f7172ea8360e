"""The steerable cellular automaton: state layout, perception, update, rollout.

State is a (B, H, W, C) array.  Channels 0..3 are premultiplied RGBA; one
designated steering channel holds either the cell's orientation angle or the
concentration field whose spatial gradient orients the cell; the rest are
hidden.  Angles follow atan2(d_row, d_col): zero points along +columns and a
quarter turn points along +rows.  `rotate_grid_quarter` rotates grid contents
by exactly that quarter turn, which for the angle variant pairs with adding
pi/2 to the steering channel of alive cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import ContractError, ShapeError

K_LAP = np.array([[1.0, 2.0, 1.0], [2.0, -12.0, 2.0], [1.0, 2.0, 1.0]])
K_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
K_Y = K_X.T.copy()

VARIANTS = ("angle", "gradient")


@dataclass
class ModelConfig:
    variant: str = "angle"
    channels: int = 16
    hidden: int = 192
    p_update: float = 0.5
    alive_threshold: float = 0.1
    steering_channel: int = -1          # negative counts from the end
    use_laplacian: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"variant must be one of {VARIANTS}")
        if self.channels < 5:
            raise ContractError("need at least 5 channels (RGBA + steering)")
        if not 0 < self.p_update <= 1:
            raise ContractError("p_update must lie in (0, 1]")
        if self.dtype not in ("float32", "float64"):
            raise ContractError("dtype must be float32 or float64")
        if not -self.channels <= self.steering_channel < self.channels:
            raise ContractError("steering_channel out of range")
        if self.steering_index < 4:
            raise ContractError("steering channel may not overlap RGBA")

    @property
    def steering_index(self) -> int:
        return self.steering_channel % self.channels

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def perception_width(self) -> int:
        # the angle variant cannot perceive its own steering channel
        stack = self.channels - 1 if self.variant == "angle" else self.channels
        return stack * (4 if self.use_laplacian else 3)


@dataclass
class ModelParams:
    """Two-layer update rule weights.  w1 starts at zero so that an untrained
    model is the identity map on any state."""

    w0: Union[np.ndarray, Tensor]
    b0: Union[np.ndarray, Tensor]
    w1: Union[np.ndarray, Tensor]

    @classmethod
    def initialize(cls, cfg: ModelConfig, rng: np.random.Generator):
        width = cfg.perception_width
        dt = cfg.np_dtype
        w0 = (rng.standard_normal((width, cfg.hidden)) / np.sqrt(width)).astype(dt)
        b0 = np.zeros(cfg.hidden, dtype=dt)
        w1 = np.zeros((cfg.hidden, cfg.channels), dtype=dt)
        return cls(w0, b0, w1)

    def on_tape(self, tape: ad.Tape) -> "ModelParams":
        return ModelParams(tape.leaf(self.w0), tape.leaf(self.b0), tape.leaf(self.w1))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w0": self.w0, "b0": self.b0, "w1": self.w1}

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.w0.astype(dtype), self.b0.astype(dtype), self.w1.astype(dtype)
        )

    def copy(self) -> "ModelParams":
        return ModelParams(self.w0.copy(), self.b0.copy(), self.w1.copy())


def _as_tensor(state) -> Tensor:
    return state if isinstance(state, Tensor) else Tensor(np.asarray(state))


def _drop_channel(t: Tensor, idx: int) -> Tensor:
    c = t.shape[3]
    if idx == c - 1:
        return ad.channels(t, 0, c - 1)
    if idx == 0:
        return ad.channels(t, 1, c)
    return ad.concat([ad.channels(t, 0, idx), ad.channels(t, idx + 1, c)])


def _rotated_gradients(stack: Tensor, cos_t: Tensor, sin_t: Tensor):
    gx = ad.conv3x3(stack, K_X)
    gy = ad.conv3x3(stack, K_Y)
    px = gx * cos_t + gy * sin_t
    py = gy * cos_t - gx * sin_t
    return px, py


def perceive_angle(state, cfg: ModelConfig) -> Tensor:
    """Perception stack for the angle variant: concat(s, lap*s, p_x, p_y).

    s excludes the steering channel; the cell reads its angle only through
    the cos/sin rotation of its Sobel gradients.
    """
    if cfg.variant != "angle":
        raise ContractError("perceive_angle called on a non-angle model")
    state = _as_tensor(state)
    theta = ad.channels(state, cfg.steering_index, cfg.steering_index + 1)
    s = _drop_channel(state, cfg.steering_index)
    px, py = _rotated_gradients(s, ad.cos(theta), ad.sin(theta))
    parts = [s]
    if cfg.use_laplacian:
        parts.append(ad.conv3x3(s, K_LAP))
    return ad.concat(parts + [px, py])


def perceive_gradient(state, cfg: ModelConfig) -> Tensor:
    """Perception stack for the gradient variant: concat(x, lap*x, p_x, p_y).

    The orientation is inferred per step from the Sobel gradient of the
    concentration channel, normalized with the divisor clipped to 1; where
    the concentration is flat the rotated gradients vanish.  The full state,
    concentration included, is perceivable.
    """
    if cfg.variant != "gradient":
        raise ContractError("perceive_gradient called on a non-gradient model")
    state = _as_tensor(state)
    conc = ad.channels(state, cfg.steering_index, cfg.steering_index + 1)
    cos_t, sin_t = ad.clipped_normalize_pair(
        ad.conv3x3(conc, K_X), ad.conv3x3(conc, K_Y)
    )
    px, py = _rotated_gradients(state, cos_t, sin_t)
    parts = [state]
    if cfg.use_laplacian:
        parts.append(ad.conv3x3(state, K_LAP))
    return ad.concat(parts + [px, py])


def perceive(state, cfg: ModelConfig) -> Tensor:
    if cfg.variant == "angle":
        return perceive_angle(state, cfg)
    return perceive_gradient(state, cfg)


def alive_mask(state_values: np.ndarray, threshold: float) -> np.ndarray:
    """1 where the 3x3 max-pooled alpha strictly exceeds the threshold.

    Returns a (B, H, W, 1) float mask; computed on raw values, never
    differentiated.
    """
    pooled = kernels.maxpool3x3(np.ascontiguousarray(state_values[:, :, :, 3]))
    return (pooled > threshold).astype(state_values.dtype)[:, :, :, None]


def _life_mask(pre: np.ndarray, new_values: np.ndarray,
               threshold: float) -> np.ndarray:
    """Combined pre/post alive mask, iterated to a fixpoint.

    Masking a cell can drop a neighbour's pooled alpha below the threshold,
    so a single pre-and-post pass may leave a kept cell with no alive
    neighbourhood.  Iterating (masks only ever shrink) guarantees that every
    surviving cell is alive in the returned state.  Almost always converges
    on the first check.
    """
    mask = pre * alive_mask(new_values, threshold)
    while True:
        shrunk = mask * alive_mask(new_values * mask, threshold)
        if np.array_equal(shrunk, mask):
            return mask
        mask = shrunk


def nca_step(state, params: ModelParams, cfg: ModelConfig,
             rng: np.random.Generator) -> Tensor:
    """One automaton step: perceive, update stochastically, mask dead cells.

    Differentiable with respect to the parameters; the alive masks and the
    Bernoulli update mask are constants in the backward pass.
    """
    state = _as_tensor(state)
    if state.shape[3] != cfg.channels:
        raise ShapeError(
            f"state has {state.shape[3]} channels, config says {cfg.channels}"
        )
    dt = state.dtype
    pre = alive_mask(state.values, cfg.alive_threshold)
    p = perceive(state, cfg)
    hidden = ad.relu(ad.dense(p, params.w0, params.b0))
    ds = ad.dense(hidden, params.w1)
    b, h, w, _ = state.shape
    update = (rng.random(size=(b, h, w, 1)) < cfg.p_update).astype(dt)
    new_state = state + ds * update
    return new_state * _life_mask(pre, new_state.values, cfg.alive_threshold)


def rollout(seed, params: ModelParams, cfg: ModelConfig, n_steps: int,
            rng: np.random.Generator, record_every: int = 0):
    """Iterate nca_step n_steps times.

    Returns (final_state, snapshots); snapshots holds value copies taken at
    steps 0, record_every, 2*record_every, ... (empty when record_every=0).
    """
    if n_steps < 1:
        raise ContractError("n_steps must be >= 1")
    state = _as_tensor(seed)
    snaps = []
    if record_every:
        snaps.append(state.values.copy())
    for step in range(1, n_steps + 1):
        state = nca_step(state, params, cfg, rng)
        if record_every and step % record_every == 0:
            snaps.append(state.values.copy())
    return state, snaps


def rotate_grid_quarter(values: np.ndarray, k: int = 1) -> np.ndarray:
    """Rotate grid contents by k quarter turns in the +angle direction.

    A feature at polar angle phi (atan2 of row/col offsets from the center)
    moves to phi + k*pi/2.  For the angle variant this pairs with adding
    k*pi/2 to the steering channel of alive cells.
    """
    return np.rot90(values, k=-k, axes=(1, 2))


def rotate_state_angle_variant(values: np.ndarray, cfg: ModelConfig,
                               k: int = 1) -> np.ndarray:
    """Quarter-turn a state AND shift alive cells' steering angle to match."""
    out = rotate_grid_quarter(values, k).copy()
    mask = alive_mask(out, cfg.alive_threshold)[:, :, :, 0]
    out[:, :, :, cfg.steering_index] += (k * np.pi / 2) * mask.astype(out.dtype)
    return out


def mirror_grid(values: np.ndarray) -> np.ndarray:
    """Flip the grid left-right (columns)."""
    return values[:, :, ::-1, :].copy()
