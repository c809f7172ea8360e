"""Command-line surface.

    steernca train <config>
    steernca rollout <ckpt> [--steps N] [--seed-rotation DEG]
                     [--seed-diameter CELLS] [--single-seed]
                     [--render rgba|angle_field] [--rng SEED[,SEED...]]
                     [--gif PATH] [--frames DIR] [--stride N]
    steernca eval <ckpt> <target.png> [--runs N] [--steps N] [--rng SEED]
                     [--out CSV]
    steernca make-target <name> <out.png> [--size N]

Exit codes: 0 success, 2 bad configuration or arguments, 3 training abort.
Every command is deterministic given an explicit --rng.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import patterns, seeding, targets, training
from .checkpoint import load_checkpoint
from .config import parse_config_file
from .errors import (CheckpointIntegrityError, CheckpointVersionError,
                     ConfigError, ContractError, TargetFormatError,
                     TrainingDiverged)
from .losses import total_loss
from .model import mirror_grid, rollout
from .render import RenderSpec, render_frame, write_gif, write_png

USER_ERRORS = (ConfigError, ContractError, TargetFormatError,
               CheckpointIntegrityError, CheckpointVersionError,
               FileNotFoundError)


def _parse_rng_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"--rng expects an integer list, got {text!r}")


def cmd_train(args) -> int:
    cfg = parse_config_file(args.config)
    if not Path(cfg.target_path).exists():
        raise ConfigError(f"target file does not exist: {cfg.target_path}")
    if not cfg.out_dir:
        stem = Path(args.config).stem
        cfg = dataclasses.replace(
            cfg, out_dir=str(Path(args.config).parent / f"{stem}_run")
        )
    out_dir = Path(cfg.out_dir)

    trainer, history = training.run_training(cfg)
    training.write_history_csv(out_dir / "loss.csv", history)

    # final rollout gif from a fresh seed
    rng = np.random.default_rng(cfg.rng_seed)
    seed = trainer._fresh_seed()
    steps = max(2 * cfg.rollout_max, 96)
    stride = max(1, steps // 63)
    _, snaps = rollout(seed, trainer.params, cfg.model, steps, rng,
                       record_every=stride)
    spec = RenderSpec(mode="rgba")
    frames = [render_frame(s, cfg.model, spec) for s in snaps]
    write_gif(out_dir / "rollout.gif", frames, scale=spec.scale)
    final = f"final loss {history[-1][1]:.6f}" if history else "no steps run"
    print(f"trained {cfg.total_steps} steps; {final}")
    print(f"outputs in {out_dir}")
    return 0


def _seed_spec_with_overrides(ckpt, args) -> seeding.SeedSpec:
    spec = ckpt.config.seed
    if getattr(args, "single_seed", False):
        spec = dataclasses.replace(spec, mode="single")
    if getattr(args, "seed_rotation", None) is not None:
        spec = seeding.rotate_seed_pair(spec, float(np.radians(args.seed_rotation)))
    if getattr(args, "seed_diameter", None) is not None:
        spec = seeding.vary_seed_diameter(spec, args.seed_diameter)
    return spec


def cmd_rollout(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    cfg = ckpt.config
    spec = _seed_spec_with_overrides(ckpt, args)
    render = RenderSpec(mode=args.render)
    stride = args.stride if args.stride else max(1, args.steps // 63)
    gif_base = Path(args.gif) if args.gif else Path(args.ckpt).with_suffix("") \
        .parent / (Path(args.ckpt).stem + "_rollout.gif")
    seeds = _parse_rng_list(args.rng)

    for rng_seed in seeds:
        rng = np.random.default_rng(rng_seed)
        seed = seeding.make_seed(spec, cfg.model, *ckpt.grid_shape, rng=rng)
        _, snaps = rollout(seed, ckpt.params, cfg.model, args.steps, rng,
                           record_every=stride)
        frames = [render_frame(s, cfg.model, render) for s in snaps]
        suffix = f"_rng{rng_seed}" if len(seeds) > 1 else ""
        gif_path = gif_base.with_name(gif_base.stem + suffix + ".gif")
        write_gif(gif_path, frames, scale=render.scale)
        print(f"wrote {gif_path} ({len(frames)} frames)")
        if args.frames:
            frame_dir = Path(args.frames)
            frame_dir.mkdir(parents=True, exist_ok=True)
            for i, frame in enumerate(frames):
                write_png(frame_dir / f"frame{suffix}_{i:04d}.png", frame,
                          scale=render.scale)
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    cfg = ckpt.config
    pattern = targets.load_target(args.target, pad=cfg.pad)
    if pattern.shape != tuple(ckpt.grid_shape):
        raise ContractError(
            f"target grid {pattern.shape} does not match checkpoint grid "
            f"{tuple(ckpt.grid_shape)} (check --pad / target size)"
        )
    target = targets.prepare_target(
        pattern, cfg.aux, cfg.sharpen_amount,
        cfg.polar_radius_bins or None, cfg.polar_angle_bins,
    )
    out_path = Path(args.out) if args.out else Path(
        Path(args.ckpt).parent / (Path(args.ckpt).stem + "_eval.csv")
    )
    rows = []
    for run in range(args.runs):
        rng = np.random.default_rng(args.rng + run)
        seed = seeding.make_seed(cfg.seed, cfg.model, *ckpt.grid_shape, rng=rng)
        final, _ = rollout(seed, ckpt.params, cfg.model, args.steps, rng)
        direct = total_loss(final, target, cfg.lambda_aux)
        mirrored = total_loss(mirror_grid(final.values), target, cfg.lambda_aux)
        rows.append([
            run, repr(direct.value),
            repr(float(np.degrees(direct.best_rotation))),
            repr(mirrored.value),
        ])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "loss", "best_rotation_deg", "mirror_loss"])
        writer.writerows(rows)
    print(f"wrote {out_path} ({len(rows)} runs)")
    return 0


def cmd_make_target(args) -> int:
    if args.name not in patterns.GENERATORS:
        raise ConfigError(
            f"unknown pattern {args.name!r}; choices: "
            + ", ".join(sorted(patterns.GENERATORS))
        )
    rgba = patterns.GENERATORS[args.name](args.size)
    patterns.save_rgba_png(args.out, rgba)
    print(f"wrote {args.out} ({rgba.shape[0]}x{rgba.shape[1]})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steernca",
        description="Train and run steerable neural cellular automata.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("rollout", help="roll out a trained model")
    p.add_argument("ckpt")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed-rotation", type=float, default=None,
                   help="rotate the seed pair by this many degrees")
    p.add_argument("--seed-diameter", type=float, default=None,
                   help="override the seed-pair separation in cells")
    p.add_argument("--single-seed", action="store_true")
    p.add_argument("--render", choices=("rgba", "angle_field"), default="rgba")
    p.add_argument("--rng", default="0", help="seed, or comma list for several runs")
    p.add_argument("--gif", default=None)
    p.add_argument("--frames", default=None, help="directory for PNG frames")
    p.add_argument("--stride", type=int, default=0,
                   help="snapshot stride (default: about 64 frames)")
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("eval", help="evaluate rotation/reflection metrics")
    p.add_argument("ckpt")
    p.add_argument("target")
    p.add_argument("--runs", type=int, default=8)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--rng", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("make-target", help="write a bundled demo pattern PNG")
    p.add_argument("name")
    p.add_argument("out")
    p.add_argument("--size", type=int, default=24)
    p.set_defaults(fn=cmd_make_target)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
