"""Versioned checkpoint files.

Layout: one header line (`steernca-checkpoint <version>`), a plain-text
manifest of `key=value` lines (config, step counter, rng state, array tables
with explicit shapes/dtypes/offsets, payload checksum), a single `payload`
separator line, then the concatenated little-endian IEEE-754 array payloads.

The manifest is written in a fixed key order from round-trip-stable encodings
(base64 config text, compact sorted JSON), so save -> load -> save is
byte-identical.  Loading verifies the payload checksum; truncation or
corruption raises CheckpointIntegrityError, an unknown version raises
CheckpointVersionError.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import format_config, parse_config
from .errors import CheckpointIntegrityError, CheckpointVersionError
from .model import ModelConfig, ModelParams
from .training import AdamState, TrainConfig

MAGIC = "steernca-checkpoint"
FORMAT_VERSION = 1

_ARRAY_ORDER = ("w0", "b0", "w1", "adam_m_w0", "adam_m_b0", "adam_m_w1",
                "adam_v_w0", "adam_v_b0", "adam_v_w1")


@dataclass
class Checkpoint:
    version: int
    config: TrainConfig
    config_text: str
    config_digest: str
    grid_shape: tuple[int, int]
    step: int
    params: ModelParams
    opt: AdamState
    rng_state: dict

    @property
    def model(self) -> ModelConfig:
        return self.config.model


def checkpoint_from_trainer(trainer) -> Checkpoint:
    text = format_config(trainer.cfg)
    return Checkpoint(
        version=FORMAT_VERSION,
        config=trainer.cfg,
        config_text=text,
        config_digest=hashlib.sha256(text.encode()).hexdigest(),
        grid_shape=tuple(trainer.grid_shape),
        step=trainer.step_count,
        params=trainer.params,
        opt=trainer.opt,
        rng_state=trainer.rng.bit_generator.state,
    )


def _checkpoint_arrays(ckpt: Checkpoint) -> dict[str, np.ndarray]:
    out = dict(ckpt.params.arrays())
    for name, arr in ckpt.opt.m.items():
        out[f"adam_m_{name}"] = arr
    for name, arr in ckpt.opt.v.items():
        out[f"adam_v_{name}"] = arr
    return out


def save_checkpoint(path, source) -> None:
    """Write a Trainer or Checkpoint to `path`."""
    ckpt = source if isinstance(source, Checkpoint) else checkpoint_from_trainer(source)
    arrays = _checkpoint_arrays(ckpt)

    payload = bytearray()
    table = []
    for name in _ARRAY_ORDER:
        arr = np.asarray(arrays[name])
        le = arr.astype("<f4" if arr.dtype == np.float32 else "<f8", copy=False)
        raw = le.tobytes(order="C")
        table.append((name, le.dtype.str, arr.shape, len(payload), len(raw)))
        payload.extend(raw)
    digest = hashlib.sha256(bytes(payload)).hexdigest()

    lines = [f"{MAGIC} {ckpt.version}"]
    lines.append(f"step={ckpt.step}")
    lines.append(f"grid={ckpt.grid_shape[0]},{ckpt.grid_shape[1]}")
    lines.append(f"config_digest={ckpt.config_digest}")
    lines.append(
        "config=" + base64.b64encode(ckpt.config_text.encode()).decode()
    )
    lines.append(
        "rng=" + json.dumps(ckpt.rng_state, sort_keys=True,
                            separators=(",", ":"))
    )
    lines.append(f"opt_t={ckpt.opt.t}")
    for name, dtype, shape, offset, nbytes in table:
        shape_s = ",".join(str(int(d)) for d in shape)
        lines.append(f"array={name};{dtype};{shape_s};{offset};{nbytes}")
    lines.append(f"payload_sha256={digest}")
    lines.append("payload")

    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        fh.write(bytes(payload))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    sep = blob.find(b"\npayload\n")
    if sep < 0:
        raise CheckpointIntegrityError(f"{path}: no payload separator found")
    header = blob[:sep].decode("utf-8", errors="replace").splitlines()
    payload = blob[sep + len(b"\npayload\n"):]

    first = header[0].split()
    if len(first) != 2 or first[0] != MAGIC:
        raise CheckpointIntegrityError(f"{path}: not a checkpoint file")
    try:
        version = int(first[1])
    except ValueError:
        raise CheckpointIntegrityError(f"{path}: malformed version header")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )

    fields: dict[str, str] = {}
    table = []
    for line in header[1:]:
        if "=" not in line:
            raise CheckpointIntegrityError(f"{path}: malformed manifest line {line!r}")
        key, value = line.split("=", 1)
        if key == "array":
            parts = value.split(";")
            if len(parts) != 5:
                raise CheckpointIntegrityError(f"{path}: malformed array entry")
            name, dtype, shape_s, offset, nbytes = parts
            shape = tuple(int(d) for d in shape_s.split(",") if d)
            table.append((name, dtype, shape, int(offset), int(nbytes)))
        else:
            fields[key] = value

    required = {"step", "grid", "config_digest", "config", "rng", "opt_t",
                "payload_sha256"}
    missing = required - fields.keys()
    if missing:
        raise CheckpointIntegrityError(f"{path}: manifest missing {sorted(missing)}")

    expected = sum(nbytes for *_, nbytes in table)
    if len(payload) != expected:
        raise CheckpointIntegrityError(
            f"{path}: payload is {len(payload)} bytes, manifest says {expected} "
            "(truncated or corrupt file)"
        )
    if hashlib.sha256(payload).hexdigest() != fields["payload_sha256"]:
        raise CheckpointIntegrityError(f"{path}: payload checksum mismatch")

    config_text = base64.b64decode(fields["config"]).decode()
    if hashlib.sha256(config_text.encode()).hexdigest() != fields["config_digest"]:
        raise CheckpointIntegrityError(f"{path}: config digest mismatch")
    config = parse_config(config_text)

    arrays = {}
    for name, dtype, shape, offset, nbytes in table:
        arr = np.frombuffer(payload[offset:offset + nbytes], dtype=dtype)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointIntegrityError(
                f"{path}: array {name} size does not match its shape"
            )
        native = "float32" if dtype.endswith("f4") else "float64"
        arrays[name] = arr.reshape(shape).astype(native)

    for name in _ARRAY_ORDER:
        if name not in arrays:
            raise CheckpointIntegrityError(f"{path}: array {name} missing")

    params = ModelParams(arrays["w0"], arrays["b0"], arrays["w1"])
    opt = AdamState(
        m={k: arrays[f"adam_m_{k}"] for k in ("w0", "b0", "w1")},
        v={k: arrays[f"adam_v_{k}"] for k in ("w0", "b0", "w1")},
        t=int(fields["opt_t"]),
    )
    grid = tuple(int(d) for d in fields["grid"].split(","))
    return Checkpoint(
        version=version,
        config=config,
        config_text=config_text,
        config_digest=fields["config_digest"],
        grid_shape=(grid[0], grid[1]),
        step=int(fields["step"]),
        params=params,
        opt=opt,
        rng_state=json.loads(fields["rng"]),
    )
