"""Initial conditions: a single seed cell, or a hue-differentiated pair.

The pair sits at center +/- (separation/2) along the orientation direction,
with orientation measured as atan2(d_row, d_col) — the same convention the
rest of the package uses for grid angles.  Each seed cell gets alpha 1 and
RGB from its HSV hue (S = V = 1); all other channels start at zero, except
that the angle variant's steering channel may be initialized to a random
angle per seed.
"""

from __future__ import annotations

import colorsys
import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SeedPlacementError
from .model import ModelConfig


@dataclass(frozen=True)
class SeedSpec:
    mode: str = "single"                    # "single" | "two"
    center: tuple[int, int] | None = None   # (row, col); None = grid center
    separation: float = 8.0                 # seed-pair diameter in cells
    orientation: float = 0.0                # radians
    hue_a: float = 0.0                      # degrees on the HSV wheel
    hue_b: float = 180.0
    angle_init: str = "zero"                # "zero" | "random"

    def __post_init__(self):
        if self.mode not in ("single", "two"):
            raise ContractError(f"seed mode must be single|two, got {self.mode!r}")
        if self.separation < 0:
            raise ContractError("separation must be >= 0")
        if self.angle_init not in ("zero", "random"):
            raise ContractError("angle_init must be zero|random")


def hue_to_rgb(hue_degrees: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb((hue_degrees % 360.0) / 360.0, 1.0, 1.0))


def _place(grid: np.ndarray, row: int, col: int, rgb: np.ndarray | None):
    h, w = grid.shape[1:3]
    if not (0 <= row < h and 0 <= col < w):
        raise SeedPlacementError(
            f"seed at ({row}, {col}) falls outside the {h}x{w} grid"
        )
    if rgb is not None:
        grid[:, row, col, 0:3] += rgb
    grid[:, row, col, 3] += 1.0


def make_seed(spec: SeedSpec, cfg: ModelConfig, height: int, width: int,
              batch: int = 1, rng: np.random.Generator | None = None) -> np.ndarray:
    """Build a (batch, height, width, channels) initial state.

    Two-seed mode places the pair at center +/- (separation/2) rotated by the
    orientation, rounding to the nearest cell.  Overlapping seeds (diameter 0
    or rounding collisions) sum their channels, with alpha clamped to 1.
    """
    state = np.zeros((batch, height, width, cfg.channels), dtype=cfg.np_dtype)
    cr, cc = spec.center if spec.center is not None else (height // 2, width // 2)
    if spec.mode == "single":
        _place(state, cr, cc, None)
        cells = [(cr, cc)]
    else:
        dr = 0.5 * spec.separation * np.sin(spec.orientation)
        dc = 0.5 * spec.separation * np.cos(spec.orientation)
        ra, ca = int(round(cr - dr)), int(round(cc - dc))
        rb, cb = int(round(cr + dr)), int(round(cc + dc))
        _place(state, ra, ca, hue_to_rgb(spec.hue_a))
        _place(state, rb, cb, hue_to_rgb(spec.hue_b))
        state[:, :, :, 3] = np.minimum(state[:, :, :, 3], 1.0)
        cells = [(ra, ca), (rb, cb)]
    if spec.angle_init == "random" and cfg.variant == "angle":
        if rng is None:
            raise ContractError("angle_init='random' needs an rng")
        for r, c in cells:
            state[:, r, c, cfg.steering_index] = rng.uniform(
                0.0, 2 * np.pi, size=batch
            )
    return state


def rotate_seed_pair(spec: SeedSpec, delta: float) -> SeedSpec:
    """Turn the seed pair by delta radians (steering experiments)."""
    if spec.mode != "two":
        raise ContractError("rotate_seed_pair needs a two-seed spec")
    return dataclasses.replace(
        spec, orientation=(spec.orientation + delta) % (2 * np.pi)
    )


def vary_seed_diameter(spec: SeedSpec, diameter: float) -> SeedSpec:
    """Replace the seed-pair separation (perturbation experiments).

    Diameter 0 drops both seeds onto the same cell: channels sum, alpha is
    clamped to 1.
    """
    if spec.mode != "two":
        raise ContractError("vary_seed_diameter needs a two-seed spec")
    if diameter < 0:
        raise ContractError("diameter must be >= 0")
    return dataclasses.replace(spec, separation=float(diameter))
