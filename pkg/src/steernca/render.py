"""Frame rendering: RGBA composites, internal-angle images, PNG/GIF output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels
from .errors import ContractError
from .model import K_X, K_Y, ModelConfig

BACKGROUNDS = ("checker", "white")
RENDER_MODES = ("rgba", "angle_field")


@dataclass(frozen=True)
class RenderSpec:
    mode: str = "rgba"
    background: str = "checker"
    stride: int = 1          # snapshot stride in automaton steps
    scale: int = 4           # nearest-neighbour upscale for output files

    def __post_init__(self):
        if self.mode not in RENDER_MODES:
            raise ContractError(f"render mode must be one of {RENDER_MODES}")
        if self.background not in BACKGROUNDS:
            raise ContractError(f"background must be one of {BACKGROUNDS}")
        if self.stride < 1 or self.scale < 1:
            raise ContractError("stride and scale must be >= 1")


def checkerboard(h: int, w: int, tile: int = 4) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    light = ((yy // tile + xx // tile) % 2).astype(np.float64)
    return (0.45 + 0.15 * light)[..., None] * np.ones(3)


def hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV (all in [0,1]) to RGB."""
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    table = np.stack([
        np.stack([v, t, p], -1), np.stack([q, v, p], -1),
        np.stack([p, v, t], -1), np.stack([p, q, v], -1),
        np.stack([t, p, v], -1), np.stack([v, p, q], -1),
    ], 0)
    return np.take_along_axis(table, i[None, ..., None], axis=0)[0]


def compose_rgba(state_values: np.ndarray, background: str = "checker") -> np.ndarray:
    """Composite one (H, W, C) state's premultiplied RGBA over a background."""
    rgba = np.clip(state_values[..., :4], 0.0, 1.0)
    h, w = rgba.shape[:2]
    bg = np.ones((h, w, 3)) if background == "white" else checkerboard(h, w)
    return np.clip(rgba[..., :3] + (1.0 - rgba[..., 3:4]) * bg, 0.0, 1.0)


def render_angle_field(state_values: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Per-cell orientation as hue, alive alpha as brightness; (H, W, 3).

    The angle variant reads the steering channel directly.  The gradient
    variant renders the (cos, sin) pair its perception computes: hue from the
    gradient direction of the concentration channel, saturation from the
    clipped norm, so cells whose gradient is suppressed show gray.  A state
    with no alive cells renders black.
    """
    sv = np.asarray(state_values)
    if sv.ndim == 4:
        sv = sv[0]
    alpha = np.clip(sv[..., 3], 0.0, 1.0)
    if cfg.variant == "angle":
        angle = sv[..., cfg.steering_index]
        sat = np.ones_like(angle)
    else:
        conc = np.ascontiguousarray(sv[None, :, :, cfg.steering_index:
                                       cfg.steering_index + 1])
        gx = kernels.conv3x3(conc, K_X)[0, :, :, 0]
        gy = kernels.conv3x3(conc, K_Y)[0, :, :, 0]
        norm = np.hypot(gx, gy)
        angle = np.arctan2(gy, gx)
        sat = np.minimum(norm, 1.0)
    hue = (angle / (2 * np.pi)) % 1.0
    return hsv_to_rgb(hue, sat, alpha)


def render_frame(state_values: np.ndarray, cfg: ModelConfig,
                 spec: RenderSpec) -> np.ndarray:
    sv = np.asarray(state_values)
    if sv.ndim == 4:
        sv = sv[0]
    if spec.mode == "rgba":
        return compose_rgba(sv, spec.background)
    return render_angle_field(sv, cfg)


def _to_image(rgb: np.ndarray, scale: int) -> Image.Image:
    img = Image.fromarray((np.clip(rgb, 0, 1) * 255).round().astype(np.uint8))
    if scale > 1:
        img = img.resize((img.width * scale, img.height * scale),
                         Image.Resampling.NEAREST)
    return img


def write_png(path, rgb: np.ndarray, scale: int = 1) -> None:
    _to_image(rgb, scale).save(path, format="PNG")


def write_gif(path, frames: list[np.ndarray], scale: int = 1,
              duration_ms: int = 60) -> None:
    if not frames:
        raise ContractError("write_gif needs at least one frame")
    images = [_to_image(f, scale) for f in frames]
    images[0].save(path, format="GIF", save_all=True,
                   append_images=images[1:], duration=duration_ms, loop=0)
