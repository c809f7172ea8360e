"""End-to-end training.

A persistent sample pool of grown states is the curriculum: each step draws
a batch, swaps the worst-matching entry for a fresh seed, rolls the batch
out for a random number of steps, backpropagates the regime loss through
every rollout step, normalizes each parameter array's gradient by its own
L2 norm, applies an adaptive-moment update, and writes the grown states
back into the pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import losses, seeding, targets
from .errors import ContractError, TrainingDiverged
from .model import ModelConfig, ModelParams, nca_step
from .seeding import SeedSpec
from .targets import AuxSpec, TargetPattern

REGIMES = ("two_seed_l2", "single_seed_rotinv")


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(mode="two"))
    aux: AuxSpec = field(default_factory=AuxSpec)
    regime: str = "two_seed_l2"
    target_path: str = ""
    pad: int = 8
    sharpen_amount: float = 1.0
    lambda_aux: float = 1.0
    polar_radius_bins: int = 0          # 0 = image half-diagonal
    polar_angle_bins: int = 256
    batch_size: int = 8
    pool_size: int = 256
    rollout_min: int = 64
    rollout_max: int = 96
    learning_rate: float = 1e-3
    lr_drop_at: float = 0.67            # fraction of total_steps
    lr_drop_factor: float = 0.5
    grad_normalize: bool = True
    total_steps: int = 10000
    rng_seed: int = 0
    checkpoint_every: int = 0           # 0 = only at the end
    out_dir: str = ""

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ContractError(f"regime must be one of {REGIMES}")
        if self.rollout_min > self.rollout_max or self.rollout_min < 1:
            raise ContractError("need 1 <= rollout_min <= rollout_max")
        if self.pool_size < self.batch_size:
            raise ContractError("pool_size must be >= batch_size")
        if self.model.steering_index < 4 + self.aux.n_channels:
            raise ContractError(
                "steering channel overlaps the RGBA/aux channels"
            )
        if self.model.channels < 4 + self.aux.n_channels + 1:
            raise ContractError("not enough channels for RGBA + aux + steering")


class SamplePool:
    """Fixed-size buffer of previously grown states plus per-entry ages."""

    def __init__(self, states: np.ndarray):
        self.states = states
        self.ages = np.zeros(len(states), dtype=np.int64)

    def __len__(self):
        return len(self.states)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def initialize(cls, params: ModelParams):
        zeros = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        return cls({k: v.copy() for k, v in zeros.items()}, zeros)


def adam_update(params: ModelParams, grads: dict[str, np.ndarray],
                state: AdamState, lr: float, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    arrays = params.arrays()
    for name, g in grads.items():
        p = arrays[name]
        m = state.m[name]
        v = state.v[name]
        m += (1 - beta1) * (g - m)
        v += (1 - beta2) * (g * g - v)
        m_hat = m / (1 - beta1 ** state.t)
        v_hat = v / (1 - beta2 ** state.t)
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)


def load_and_prepare_target(cfg: TrainConfig) -> TargetPattern:
    pattern = targets.load_target(cfg.target_path, pad=cfg.pad)
    return targets.prepare_target(
        pattern, cfg.aux, cfg.sharpen_amount,
        cfg.polar_radius_bins or None, cfg.polar_angle_bins,
    )


class Trainer:
    """Owns the mutable training state: params, pool, optimizer, rng."""

    def __init__(self, cfg: TrainConfig, target: TargetPattern | None = None):
        self.cfg = cfg
        self.target = target if target is not None else load_and_prepare_target(cfg)
        self.grid_shape = self.target.shape
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.params = ModelParams.initialize(cfg.model, self.rng)
        self.opt = AdamState.initialize(self.params)
        self.step_count = 0
        h, w = self.grid_shape
        self.pool = SamplePool(np.concatenate(
            [self._fresh_seed() for _ in range(cfg.pool_size)], axis=0
        ))

    def _fresh_seed(self) -> np.ndarray:
        return seeding.make_seed(
            self.cfg.seed, self.cfg.model, *self.grid_shape, rng=self.rng
        )

    def _loss(self, state) -> losses.LossReport:
        if self.cfg.regime == "two_seed_l2":
            return losses.l2_loss(state, self.target, self.cfg.lambda_aux)
        return losses.total_loss(state, self.target, self.cfg.lambda_aux)

    def learning_rate(self) -> float:
        lr = self.cfg.learning_rate
        if self.step_count >= self.cfg.lr_drop_at * self.cfg.total_steps:
            lr *= self.cfg.lr_drop_factor
        return lr

    def train_step(self) -> losses.LossReport:
        """One optimization step; returns the batch loss report."""
        cfg = self.cfg
        idx = self.rng.choice(len(self.pool), size=cfg.batch_size, replace=False)
        batch = self.pool.states[idx].copy()

        # pool refresh: the worst-matching entry restarts from a seed
        rank = self._loss(batch).per_sample
        worst = int(np.argmax(rank))
        batch[worst] = self._fresh_seed()[0]
        self.pool.ages[idx[worst]] = 0

        n_steps = int(self.rng.integers(cfg.rollout_min, cfg.rollout_max + 1))
        tape = ad.Tape()
        params_t = self.params.on_tape(tape)
        state = tape.leaf(batch)
        for _ in range(n_steps):
            state = nca_step(state, params_t, cfg.model, self.rng)
        report = self._loss(state)

        if not np.isfinite(report.value):
            raise TrainingDiverged(
                f"non-finite loss at step {self.step_count}; rng state: "
                + json.dumps(self.rng.bit_generator.state, default=str)
            )

        tape.backward(report.tensor)
        grads = {
            "w0": tape.grad(params_t.w0),
            "b0": tape.grad(params_t.b0),
            "w1": tape.grad(params_t.w1),
        }
        if cfg.grad_normalize:
            for name, g in grads.items():
                grads[name] = g / (np.linalg.norm(g) + 1e-8)
        adam_update(self.params, grads, self.opt, self.learning_rate())

        self.pool.states[idx] = state.values
        self.pool.ages[idx] += 1
        self.step_count += 1
        return report

    def run(self, on_step=None) -> list[tuple[int, float, float]]:
        """Run cfg.total_steps steps; returns (step, loss, rotation) history.

        Emits periodic checkpoints into cfg.out_dir when configured; rotation
        is NaN for the L2 regime.
        """
        from .checkpoint import save_checkpoint  # local import, cycle-free

        cfg = self.cfg
        out_dir = Path(cfg.out_dir) if cfg.out_dir else None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
        history = []
        for _ in range(cfg.total_steps):
            report = self.train_step()
            rot = np.nan if report.best_rotation is None else report.best_rotation
            history.append((self.step_count, report.value, float(rot)))
            if on_step is not None:
                on_step(self.step_count, report)
            if (out_dir and cfg.checkpoint_every
                    and self.step_count % cfg.checkpoint_every == 0):
                save_checkpoint(
                    out_dir / f"checkpoint_{self.step_count:06d}.ckpt", self
                )
        if out_dir:
            save_checkpoint(out_dir / "checkpoint.ckpt", self)
        return history


def run_training(cfg: TrainConfig, on_step=None):
    """Train from scratch; returns (trainer, history)."""
    trainer = Trainer(cfg)
    history = trainer.run(on_step=on_step)
    return trainer, history


def write_history_csv(path, history) -> None:
    """Loss history as CSV: step, loss, best_rotation (blank for L2 runs)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "best_rotation"])
        for step, value, rot in history:
            writer.writerow([
                step, repr(float(value)),
                "" if np.isnan(rot) else repr(float(rot)),
            ])
