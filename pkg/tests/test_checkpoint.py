"""Checkpoint container: round trips, integrity, versioning."""

import numpy as np
import pytest

from steernca.checkpoint import (FORMAT_VERSION, checkpoint_from_trainer,
                                 load_checkpoint, save_checkpoint)
from steernca.errors import CheckpointIntegrityError, CheckpointVersionError
from steernca.model import ModelConfig
from steernca.seeding import SeedSpec
from steernca.targets import AuxSpec
from steernca.training import TrainConfig, Trainer


@pytest.fixture()
def trainer(pinwheel_png):
    cfg = TrainConfig(
        model=ModelConfig(variant="angle", channels=8, hidden=16),
        seed=SeedSpec(mode="two", separation=8.0),
        aux=AuxSpec("none"), regime="two_seed_l2",
        target_path=str(pinwheel_png), pad=0,
        polar_radius_bins=12, polar_angle_bins=64,
        batch_size=2, pool_size=4, rollout_min=2, rollout_max=3,
        total_steps=4, rng_seed=3,
    )
    tr = Trainer(cfg)
    for _ in range(4):
        tr.train_step()
    return tr


def test_round_trip_parameters_bit_identical(trainer, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, trainer)
    ckpt = load_checkpoint(path)
    for name, arr in trainer.params.arrays().items():
        np.testing.assert_array_equal(ckpt.params.arrays()[name], arr)
    for name in ("w0", "b0", "w1"):
        np.testing.assert_array_equal(ckpt.opt.m[name], trainer.opt.m[name])
        np.testing.assert_array_equal(ckpt.opt.v[name], trainer.opt.v[name])
    assert ckpt.step == trainer.step_count
    assert ckpt.opt.t == trainer.opt.t
    assert ckpt.rng_state == trainer.rng.bit_generator.state
    assert ckpt.model == trainer.cfg.model
    assert ckpt.config == trainer.cfg
    assert ckpt.grid_shape == tuple(trainer.grid_shape)


def test_save_load_save_byte_identical(trainer, tmp_path):
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, trainer)
    save_checkpoint(p2, load_checkpoint(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_truncated_file_is_integrity_error(trainer, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, trainer)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 200])
    with pytest.raises(CheckpointIntegrityError):
        load_checkpoint(path)


def test_corrupted_payload_is_integrity_error(trainer, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, trainer)
    blob = bytearray(path.read_bytes())
    blob[-20] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointIntegrityError):
        load_checkpoint(path)


def test_unsupported_version_rejected(trainer, tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, trainer)
    blob = path.read_bytes()
    old = f"steernca-checkpoint {FORMAT_VERSION}".encode()
    new = f"steernca-checkpoint {FORMAT_VERSION + 1}".encode()
    path.write_bytes(blob.replace(old, new, 1))
    with pytest.raises(CheckpointVersionError) as err:
        load_checkpoint(path)
    assert str(FORMAT_VERSION + 1) in str(err.value)


def test_not_a_checkpoint_at_all(tmp_path):
    path = tmp_path / "noise.ckpt"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CheckpointIntegrityError):
        load_checkpoint(path)


def test_checkpoint_digest_matches_config(trainer, tmp_path):
    import hashlib

    ckpt = checkpoint_from_trainer(trainer)
    assert ckpt.config_digest == hashlib.sha256(
        ckpt.config_text.encode()).hexdigest()
