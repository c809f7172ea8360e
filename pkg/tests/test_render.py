"""Rendering: RGBA composites, angle-field images, GIF/PNG output."""

import numpy as np
import pytest
from PIL import Image

from steernca.errors import ContractError
from steernca.model import ModelConfig
from steernca.render import (RenderSpec, compose_rgba, hsv_to_rgb,
                             render_angle_field, render_frame, write_gif,
                             write_png)


def test_hsv_to_rgb_reference_points():
    h = np.array([0.0, 1 / 3, 2 / 3])
    s = np.ones(3)
    v = np.ones(3)
    rgb = hsv_to_rgb(h, s, v)
    np.testing.assert_allclose(rgb, [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                               atol=1e-12)
    gray = hsv_to_rgb(np.array([0.42]), np.zeros(1), np.array([0.5]))
    np.testing.assert_allclose(gray, [[0.5, 0.5, 0.5]])


def test_compose_over_white():
    state = np.zeros((4, 4, 6))
    state[1, 1, :4] = [0.25, 0.0, 0.0, 0.5]    # premultiplied half-red
    rgb = compose_rgba(state, "white")
    np.testing.assert_allclose(rgb[1, 1], [0.75, 0.5, 0.5])
    np.testing.assert_allclose(rgb[0, 0], [1, 1, 1])


def test_angle_field_uniform_angle_uniform_hue():
    cfg = ModelConfig(variant="angle", channels=6, hidden=8)
    state = np.zeros((5, 5, 6))
    state[1:4, 1:4, 3] = 1.0
    state[1:4, 1:4, cfg.steering_index] = 0.0
    img0 = render_angle_field(state, cfg)
    alive = img0[1:4, 1:4].reshape(-1, 3)
    assert np.allclose(alive, alive[0])
    np.testing.assert_allclose(alive[0], [1, 0, 0], atol=1e-9)   # hue 0

    state[1:4, 1:4, cfg.steering_index] = np.pi / 2
    img1 = render_angle_field(state, cfg)
    alive1 = img1[1:4, 1:4].reshape(-1, 3)
    assert np.allclose(alive1, alive1[0])
    assert not np.allclose(alive1[0], alive[0])                  # hue moved
    np.testing.assert_allclose(img1[0, 0], [0, 0, 0])            # dead: black


def test_angle_field_gradient_variant_flat_concentration_gray():
    cfg = ModelConfig(variant="gradient", channels=6, hidden=8)
    state = np.zeros((7, 7, 6))
    state[2:5, 2:5, 3] = 1.0
    state[:, :, cfg.steering_index] = 0.0      # flat: suppressed gradient
    img = render_angle_field(state, cfg)
    center = img[3, 3]
    assert center[0] == center[1] == center[2] > 0    # gray, bright


def test_angle_field_blank_when_no_alive_cells():
    cfg = ModelConfig(variant="angle", channels=6, hidden=8)
    img = render_angle_field(np.zeros((5, 5, 6)), cfg)
    assert np.all(img == 0.0)


def test_render_spec_validation():
    with pytest.raises(ContractError):
        RenderSpec(mode="fancy")
    with pytest.raises(ContractError):
        RenderSpec(background="plaid")
    with pytest.raises(ContractError):
        RenderSpec(stride=0)


def test_write_png_and_gif(tmp_path):
    frames = [np.full((8, 8, 3), v) for v in (0.0, 0.5, 1.0)]
    png = tmp_path / "frame.png"
    write_png(png, frames[1], scale=2)
    with Image.open(png) as img:
        assert img.size == (16, 16)

    gif = tmp_path / "anim.gif"
    write_gif(gif, frames)
    with Image.open(gif) as img:
        assert img.format == "GIF"
        assert getattr(img, "n_frames", 1) == 3
    with pytest.raises(ContractError):
        write_gif(tmp_path / "empty.gif", [])


def test_render_frame_dispatch():
    cfg = ModelConfig(variant="angle", channels=6, hidden=8)
    state = np.zeros((1, 5, 5, 6))
    rgba = render_frame(state, cfg, RenderSpec(mode="rgba", background="white"))
    field = render_frame(state, cfg, RenderSpec(mode="angle_field"))
    assert rgba.shape == (5, 5, 3) and field.shape == (5, 5, 3)
    assert np.all(rgba == 1.0) and np.all(field == 0.0)
