"""Flat key-value experiment configuration.

One `key = value` per line; `#` starts a comment.  Every TrainConfig,
ModelConfig, SeedSpec, and AuxSpec field is exposed; unknown keys and bad
values fail with the offending line number.  `format_config` writes a
canonical form (fixed key order) that `parse_config` round-trips exactly,
which the checkpoint format relies on.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError
from .model import ModelConfig, VARIANTS
from .seeding import SeedSpec
from .targets import AUX_KINDS, AuxSpec
from .training import REGIMES, TrainConfig

_BOOL = {"true": True, "false": False, "yes": True, "no": False,
         "1": True, "0": False}

# name -> (type tag, default, choices or None)
SCHEMA: dict[str, tuple] = {
    # model
    "variant": ("str", "angle", VARIANTS),
    "channels": ("int", 16, None),
    "hidden_size": ("int", 192, None),
    "p_update": ("float", 0.5, None),
    "alive_threshold": ("float", 0.1, None),
    "steering_channel": ("int", -1, None),
    "use_laplacian": ("bool", True, None),
    "dtype": ("str", "float32", ("float32", "float64")),
    # target pipeline
    "target": ("str", "", None),
    "pad": ("int", 8, None),
    "sharpen_amount": ("float", 1.0, None),
    "aux_kind": ("str", "none", AUX_KINDS),
    "lambda_aux": ("float", 1.0, None),
    "polar_radius_bins": ("int", 0, None),
    "polar_angle_bins": ("int", 256, None),
    # seeding
    "seed_mode": ("str", "two", ("single", "two")),
    "seed_row": ("int", -1, None),
    "seed_col": ("int", -1, None),
    "seed_separation": ("float", 8.0, None),
    "seed_orientation_deg": ("float", 0.0, None),
    "seed_hue_a_deg": ("float", 0.0, None),
    "seed_hue_b_deg": ("float", 180.0, None),
    "seed_angle_init": ("str", "zero", ("zero", "random")),
    # training
    "regime": ("str", "two_seed_l2", REGIMES),
    "batch_size": ("int", 8, None),
    "pool_size": ("int", 256, None),
    "rollout_min": ("int", 64, None),
    "rollout_max": ("int", 96, None),
    "learning_rate": ("float", 1e-3, None),
    "lr_drop_at": ("float", 0.67, None),
    "lr_drop_factor": ("float", 0.5, None),
    "grad_normalize": ("bool", True, None),
    "total_steps": ("int", 10000, None),
    "rng_seed": ("int", 0, None),
    "checkpoint_every": ("int", 0, None),
    "out_dir": ("str", "", None),
}


def _parse_value(key: str, raw: str, lineno: int):
    kind, _, choices = SCHEMA[key]
    try:
        if kind == "int":
            value = int(raw)
        elif kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
        elif kind == "bool":
            if raw.lower() not in _BOOL:
                raise ValueError("expected true/false")
            value = _BOOL[raw.lower()]
        else:
            value = raw
    except ValueError as exc:
        raise ConfigError(
            f"line {lineno}: bad {kind} value for {key!r}: {raw!r} ({exc})"
        ) from None
    if choices is not None and value not in choices:
        raise ConfigError(
            f"line {lineno}: {key!r} must be one of {', '.join(choices)}; "
            f"got {raw!r}"
        )
    return value


def parse_config(text: str, base_dir=None) -> TrainConfig:
    """Parse config text; raises ConfigError with the offending line number."""
    values = dict()
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first on line {seen[key]})"
            )
        seen[key] = lineno
        values[key] = _parse_value(key, raw, lineno)

    merged = {key: spec[1] for key, spec in SCHEMA.items()}
    merged.update(values)
    if not merged["target"]:
        raise ConfigError("missing required key: target")
    if base_dir is not None:
        merged["target"] = str((Path(base_dir) / merged["target"]).resolve())

    try:
        model = ModelConfig(
            variant=merged["variant"],
            channels=merged["channels"],
            hidden=merged["hidden_size"],
            p_update=merged["p_update"],
            alive_threshold=merged["alive_threshold"],
            steering_channel=merged["steering_channel"],
            use_laplacian=merged["use_laplacian"],
            dtype=merged["dtype"],
        )
        center = None
        if merged["seed_row"] >= 0 or merged["seed_col"] >= 0:
            if merged["seed_row"] < 0 or merged["seed_col"] < 0:
                raise ContractError("set both seed_row and seed_col, or neither")
            center = (merged["seed_row"], merged["seed_col"])
        seed = SeedSpec(
            mode=merged["seed_mode"],
            center=center,
            separation=merged["seed_separation"],
            orientation=float(np.radians(merged["seed_orientation_deg"])),
            hue_a=merged["seed_hue_a_deg"],
            hue_b=merged["seed_hue_b_deg"],
            angle_init=merged["seed_angle_init"],
        )
        return TrainConfig(
            model=model,
            seed=seed,
            aux=AuxSpec(merged["aux_kind"]),
            regime=merged["regime"],
            target_path=merged["target"],
            pad=merged["pad"],
            sharpen_amount=merged["sharpen_amount"],
            lambda_aux=merged["lambda_aux"],
            polar_radius_bins=merged["polar_radius_bins"],
            polar_angle_bins=merged["polar_angle_bins"],
            batch_size=merged["batch_size"],
            pool_size=merged["pool_size"],
            rollout_min=merged["rollout_min"],
            rollout_max=merged["rollout_max"],
            learning_rate=merged["learning_rate"],
            lr_drop_at=merged["lr_drop_at"],
            lr_drop_factor=merged["lr_drop_factor"],
            grad_normalize=merged["grad_normalize"],
            total_steps=merged["total_steps"],
            rng_seed=merged["rng_seed"],
            checkpoint_every=merged["checkpoint_every"],
            out_dir=merged["out_dir"],
        )
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_file(path) -> TrainConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def _format_value(kind: str, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    return str(value)


def format_config(cfg: TrainConfig) -> str:
    """Canonical flat serialization; parse_config(format_config(c)) == c."""
    m, s = cfg.model, cfg.seed
    row, col = s.center if s.center is not None else (-1, -1)
    current = {
        "variant": m.variant, "channels": m.channels, "hidden_size": m.hidden,
        "p_update": m.p_update, "alive_threshold": m.alive_threshold,
        "steering_channel": m.steering_channel,
        "use_laplacian": m.use_laplacian, "dtype": m.dtype,
        "target": cfg.target_path, "pad": cfg.pad,
        "sharpen_amount": cfg.sharpen_amount, "aux_kind": cfg.aux.kind,
        "lambda_aux": cfg.lambda_aux,
        "polar_radius_bins": cfg.polar_radius_bins,
        "polar_angle_bins": cfg.polar_angle_bins,
        "seed_mode": s.mode, "seed_row": row, "seed_col": col,
        "seed_separation": s.separation,
        "seed_orientation_deg": float(np.degrees(s.orientation)),
        "seed_hue_a_deg": s.hue_a, "seed_hue_b_deg": s.hue_b,
        "seed_angle_init": s.angle_init,
        "regime": cfg.regime, "batch_size": cfg.batch_size,
        "pool_size": cfg.pool_size, "rollout_min": cfg.rollout_min,
        "rollout_max": cfg.rollout_max, "learning_rate": cfg.learning_rate,
        "lr_drop_at": cfg.lr_drop_at, "lr_drop_factor": cfg.lr_drop_factor,
        "grad_normalize": cfg.grad_normalize, "total_steps": cfg.total_steps,
        "rng_seed": cfg.rng_seed, "checkpoint_every": cfg.checkpoint_every,
        "out_dir": cfg.out_dir,
    }
    lines = [
        f"{key} = {_format_value(SCHEMA[key][0], current[key])}"
        for key in SCHEMA
    ]
    return "\n".join(lines) + "\n"
