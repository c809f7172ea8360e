"""Minimal reverse-mode automatic differentiation over (B, H, W, C) arrays.

The op set is exactly what the cellular-automaton forward pass and its losses
need: fixed-kernel depthwise 3x3 correlation, a per-pixel channelwise affine
map, a small elementwise family, channel slicing/concatenation, a bilinear
polar resampling, and full reduction to a scalar.  Ops work on `Tensor`
values; when every operand is a constant (no tape attached) they compute the
forward value only, so the same code path serves training and inference.

A `Tape` records one computation (typically one training step) and is
discarded afterwards.  Backward rules live in the module-level
`BACKWARD_RULES` registry, keyed by op name, and replay strictly in reverse
recording order.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import ContractError, ShapeError


class Tensor:
    """A dense rank-4 array, optionally recorded on a tape.

    Tensors are immutable values: ops return new tensors and never write into
    operands.  `node_id` is None for constants.
    """

    __slots__ = ("values", "tape", "node_id")

    def __init__(self, values, tape=None, node_id=None):
        self.values = np.asarray(values)
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def __repr__(self):
        tag = "const" if self.node_id is None else f"node {self.node_id}"
        return f"Tensor({self.shape}, {self.dtype}, {tag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class _Record(NamedTuple):
    op: str
    in_ids: tuple       # node id per input slot, None for constants
    out_ids: tuple
    ctx: tuple


class Tape:
    """Ordered record of operations plus gradient buffers keyed by node id."""

    def __init__(self):
        self._records: list[_Record] = []
        self._meta: list[tuple] = []      # (shape, dtype) per node id
        self._grads: dict[int, np.ndarray] | None = None

    def _new_node(self, shape, dtype) -> int:
        self._meta.append((shape, dtype))
        return len(self._meta) - 1

    def leaf(self, values) -> Tensor:
        """Register an input (parameter or state) the tape differentiates to."""
        values = np.asarray(values)
        return Tensor(values, self, self._new_node(values.shape, values.dtype))

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Accumulate gradients of a scalar loss into fresh buffers.

        Repeated calls reset the buffers first, so the result is idempotent.
        Returns the buffer map; nodes that do not influence the loss are
        absent (their gradient is exactly zero, see `grad`).
        """
        if loss.tape is not self or loss.node_id is None:
            raise ContractError("loss was not produced on this tape")
        if loss.values.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        grads: list = [None] * len(self._meta)
        grads[loss.node_id] = np.ones(loss.shape, dtype=loss.dtype)
        for rec in reversed(self._records):
            out_grads = [grads[i] for i in rec.out_ids]
            if all(g is None for g in out_grads):
                continue
            for slot, i in enumerate(rec.out_ids):
                if out_grads[slot] is None:
                    shape, dtype = self._meta[i]
                    out_grads[slot] = np.zeros(shape, dtype=dtype)
            in_grads = BACKWARD_RULES[rec.op](rec.ctx, *out_grads)
            for i, g in zip(rec.in_ids, in_grads):
                if i is None or g is None:
                    continue
                if grads[i] is None:
                    grads[i] = g
                else:
                    grads[i] += g
        self._grads = {i: g for i, g in enumerate(grads) if g is not None}
        return self._grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient buffer of a tensor after `backward` (zeros if unused)."""
        if self._grads is None:
            raise ContractError("backward has not been called on this tape")
        g = self._grads.get(t.node_id)
        if g is None:
            return np.zeros(t.shape, dtype=t.dtype)
        return g


def _operand_values(x, dtype):
    if isinstance(x, Tensor):
        return x.values
    return np.asarray(x, dtype=dtype)


def _find_tape(operands):
    tape = None
    for x in operands:
        if isinstance(x, Tensor) and x.tape is not None:
            if tape is not None and x.tape is not tape:
                raise ContractError("operands recorded on different tapes")
            tape = x.tape
    return tape


def _node_id(x):
    return x.node_id if isinstance(x, Tensor) else None


def _emit(op, operands, out_values, ctx) -> Tensor:
    tape = _find_tape(operands)
    if tape is None:
        return Tensor(out_values)
    out = tape.leaf(out_values)
    tape._records.append(
        _Record(op, tuple(_node_id(x) for x in operands), (out.node_id,), ctx)
    )
    return out


def _emit_pair(op, operands, out_a, out_b, ctx) -> tuple[Tensor, Tensor]:
    tape = _find_tape(operands)
    if tape is None:
        return Tensor(out_a), Tensor(out_b)
    a, b = tape.leaf(out_a), tape.leaf(out_b)
    tape._records.append(
        _Record(op, tuple(_node_id(x) for x in operands), (a.node_id, b.node_id), ctx)
    )
    return a, b


BACKWARD_RULES: dict[str, Callable] = {}


def _rule(name):
    def deco(fn):
        BACKWARD_RULES[name] = fn
        return fn
    return deco


# ---------------------------------------------------------------------------
# depthwise 3x3 correlation

def conv3x3(t: Tensor, kernel) -> Tensor:
    """Per-channel 3x3 cross-correlation with zero padding.

    The kernel is a fixed (3, 3) coefficient matrix, never learned.
    """
    kernel = np.asarray(kernel, dtype=t.dtype)
    if t.values.ndim != 4 or t.shape[1] < 3 or t.shape[2] < 3:
        raise ShapeError(f"conv3x3 needs (B,H>=3,W>=3,C), got {t.shape}")
    out = kernels.conv3x3(t.values, kernel)
    return _emit("conv3x3", (t,), out, (kernel,))


@_rule("conv3x3")
def _conv3x3_bwd(ctx, g):
    (kernel,) = ctx
    return (kernels.conv3x3(g, kernel[::-1, ::-1]),)


# ---------------------------------------------------------------------------
# per-pixel channelwise affine map

def dense(t: Tensor, w, b=None) -> Tensor:
    """Per-pixel affine map over channels: y = x @ w (+ b)."""
    wv = _operand_values(w, t.dtype)
    if wv.ndim != 2 or t.shape[3] != wv.shape[0]:
        raise ShapeError(
            f"dense weight {wv.shape} incompatible with {t.shape[3]} channels"
        )
    bv = None if b is None else _operand_values(b, t.dtype)
    if bv is not None and bv.shape != (wv.shape[1],):
        raise ShapeError(f"dense bias {bv.shape} does not match {wv.shape[1]} outputs")
    x2 = t.values.reshape(-1, wv.shape[0])
    y = x2 @ wv
    if bv is not None:
        y += bv
    out = y.reshape(t.shape[:3] + (wv.shape[1],))
    operands = (t, w) if b is None else (t, w, b)
    needs = tuple(_node_id(x) is not None for x in operands)
    return _emit("dense", operands, out, (t.values, wv, needs))


@_rule("dense")
def _dense_bwd(ctx, g):
    xv, wv, needs = ctx
    g2 = g.reshape(-1, wv.shape[1])
    dt = (g2 @ wv.T).reshape(xv.shape) if needs[0] else None
    dw = xv.reshape(-1, wv.shape[0]).T @ g2 if needs[1] else None
    db = g2.sum(axis=0) if len(needs) > 2 and needs[2] else None
    return (dt, dw, db)


# ---------------------------------------------------------------------------
# elementwise family

def _binary_values(a, b, op_name):
    av = a.values if isinstance(a, Tensor) else None
    bv = b.values if isinstance(b, Tensor) else None
    if av is None and bv is None:
        raise ContractError(f"{op_name} needs at least one Tensor operand")
    dtype = av.dtype if av is not None else bv.dtype
    if av is None:
        av = _as_operand_array(a, dtype, bv.shape, op_name)
    if bv is None:
        bv = _as_operand_array(b, dtype, av.shape, op_name)
    return av, bv


def _as_operand_array(x, dtype, other_shape, op_name):
    v = np.asarray(x, dtype=dtype)
    if v.ndim == 0:
        return v
    if v.shape != other_shape and not _channel_broadcast(v.shape, other_shape):
        raise ShapeError(f"{op_name}: shape {v.shape} does not match {other_shape}")
    return v


def _channel_broadcast(sa, sb):
    # allowed: identical, scalar, or (B,H,W,1) against (B,H,W,C)
    if len(sa) != 4 or len(sb) != 4 or sa[:3] != sb[:3]:
        return False
    return sa[3] == 1 or sb[3] == 1


def _check_binary_shapes(av, bv, op_name):
    if av.ndim == 0 or bv.ndim == 0:
        return
    if av.shape == bv.shape or _channel_broadcast(av.shape, bv.shape):
        return
    raise ShapeError(f"{op_name}: shapes {av.shape} and {bv.shape} do not match")


def _reduce_to(g, shape):
    """Undo scalar or trailing-channel broadcast in a gradient."""
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return g.sum()
    return g.sum(axis=3, keepdims=True)


def add(a, b) -> Tensor:
    av, bv = _binary_values(a, b, "add")
    _check_binary_shapes(av, bv, "add")
    needs = (_node_id(a) is not None, _node_id(b) is not None)
    return _emit("add", (a, b), av + bv, (av.shape, bv.shape, needs))


@_rule("add")
def _add_bwd(ctx, g):
    sa, sb, needs = ctx
    return (_reduce_to(g, sa) if needs[0] else None,
            _reduce_to(g, sb) if needs[1] else None)


def sub(a, b) -> Tensor:
    av, bv = _binary_values(a, b, "sub")
    _check_binary_shapes(av, bv, "sub")
    needs = (_node_id(a) is not None, _node_id(b) is not None)
    return _emit("sub", (a, b), av - bv, (av.shape, bv.shape, needs))


@_rule("sub")
def _sub_bwd(ctx, g):
    sa, sb, needs = ctx
    return (_reduce_to(g, sa) if needs[0] else None,
            _reduce_to(-g, sb) if needs[1] else None)


def mul(a, b) -> Tensor:
    av, bv = _binary_values(a, b, "mul")
    _check_binary_shapes(av, bv, "mul")
    needs = (_node_id(a) is not None, _node_id(b) is not None)
    return _emit("mul", (a, b), av * bv, (av, bv, needs))


@_rule("mul")
def _mul_bwd(ctx, g):
    av, bv, needs = ctx
    da = _reduce_to(g * bv, av.shape) if needs[0] else None
    db = _reduce_to(g * av, bv.shape) if needs[1] else None
    return (da, db)


def relu(t: Tensor) -> Tensor:
    # gradient at exactly zero is zero; mask stored pre-cast for the backward
    mask = (t.values > 0).astype(t.dtype)
    return _emit("relu", (t,), t.values * mask, (mask,))


@_rule("relu")
def _relu_bwd(ctx, g):
    (mask,) = ctx
    return (g * mask,)


def sin(t: Tensor) -> Tensor:
    return _emit("sin", (t,), np.sin(t.values), (t.values,))


@_rule("sin")
def _sin_bwd(ctx, g):
    (x,) = ctx
    return (g * np.cos(x),)


def cos(t: Tensor) -> Tensor:
    return _emit("cos", (t,), np.cos(t.values), (t.values,))


@_rule("cos")
def _cos_bwd(ctx, g):
    (x,) = ctx
    return (-g * np.sin(x),)


def clip(t: Tensor, lo: float, hi: float) -> Tensor:
    """Scalar clip; gradient passes on the closed interval [lo, hi]."""
    mask = (t.values >= lo) & (t.values <= hi)
    return _emit("clip", (t,), np.clip(t.values, lo, hi), (mask,))


@_rule("clip")
def _clip_bwd(ctx, g):
    (mask,) = ctx
    return (g * mask,)


def clipped_normalize_pair(gx: Tensor, gy: Tensor) -> tuple[Tensor, Tensor]:
    """(gx, gy) / max(norm(gx, gy), 1), computed per element.

    Clipping the divisor to 1 removes the singularity at zero norm: inside the
    unit disc the pair passes through unchanged and the gradient is that of a
    constant denominator.
    """
    if gx.shape != gy.shape:
        raise ShapeError(f"pair shapes differ: {gx.shape} vs {gy.shape}")
    xv, yv = gx.values, gy.values
    n = np.sqrt(xv * xv + yv * yv)
    d = np.maximum(n, 1)
    return _emit_pair(
        "clipped_normalize_pair", (gx, gy), xv / d, yv / d, (xv, yv, d, n > 1)
    )


@_rule("clipped_normalize_pair")
def _cnp_bwd(ctx, gu, gv):
    xv, yv, d, active = ctx
    # unified: for inactive elements d == 1 and the second term vanishes
    common = np.where(active, (gu * xv + gv * yv) / (d * d * d), 0)
    return (gu / d - xv * common, gv / d - yv * common)


# ---------------------------------------------------------------------------
# channel plumbing

def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate along the channel axis."""
    vals = [p.values for p in parts]
    base = vals[0].shape[:3]
    for v in vals[1:]:
        if v.shape[:3] != base:
            raise ShapeError("concat operands disagree on (B, H, W)")
    widths = tuple(v.shape[3] for v in vals)
    return _emit("concat", tuple(parts), np.concatenate(vals, axis=3), (widths,))


@_rule("concat")
def _concat_bwd(ctx, g):
    (widths,) = ctx
    return tuple(np.split(g, np.cumsum(widths)[:-1], axis=3))


def channels(t: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous channel slice [start, stop)."""
    c = t.shape[3]
    if not (0 <= start < stop <= c):
        raise ShapeError(f"channel slice [{start}:{stop}) out of range for C={c}")
    # copy so downstream kernels see contiguous memory
    out = np.ascontiguousarray(t.values[:, :, :, start:stop])
    return _emit("channels", (t,), out, (start, stop, t.shape))


@_rule("channels")
def _channels_bwd(ctx, g):
    start, stop, shape = ctx
    full = np.zeros(shape, dtype=g.dtype)
    full[:, :, :, start:stop] = g
    return (full,)


# ---------------------------------------------------------------------------
# bilinear polar resampling (a fixed linear map; see targets.PolarPlan)

def polar_sample(t: Tensor, plan) -> Tensor:
    """Resample (B,H,W,C) onto the plan's (radius, angle) lattice."""
    if t.shape[1] != plan.grid_shape[0] or t.shape[2] != plan.grid_shape[1]:
        raise ShapeError(
            f"polar plan built for grid {plan.grid_shape}, state is {t.shape[1:3]}"
        )
    b, h, w, c = t.shape
    flat = t.values.reshape(b, h * w, c)
    gathered = flat[:, plan.flat_index.ravel(), :].reshape(
        b, plan.radius_bins, plan.angle_bins, 4, c
    )
    wts = plan.tap_weights[None, :, :, :, None].astype(t.dtype)
    out = (gathered * wts).sum(axis=3)
    return _emit("polar_sample", (t,), out, (plan, t.shape))


@_rule("polar_sample")
def _polar_sample_bwd(ctx, g):
    plan, shape = ctx
    b, h, w, c = shape
    taps = g[:, :, :, None, :] * plan.tap_weights[None, :, :, :, None].astype(g.dtype)
    taps = taps.reshape(b, -1, c)
    out = np.zeros((b, h * w, c), dtype=g.dtype)
    idx = plan.flat_index.ravel()
    for i in range(b):
        np.add.at(out[i], idx, taps[i])
    return (out.reshape(shape),)


# ---------------------------------------------------------------------------
# reduction

def sum_all(t: Tensor) -> Tensor:
    """Sum over every element, returning a (1,1,1,1) scalar tensor."""
    out = t.values.sum(dtype=t.dtype).reshape(1, 1, 1, 1)
    return _emit("sum_all", (t,), out, (t.shape,))


@_rule("sum_all")
def _sum_all_bwd(ctx, g):
    (shape,) = ctx
    return (np.full(shape, g.reshape(()).item(), dtype=g.dtype),)


# ---------------------------------------------------------------------------
# finite-difference verification

def grad_check(loss_fn, params, eps=1e-4, max_coords=10_000, rng=None):
    """Worst relative error between tape gradients and central differences.

    loss_fn takes one Tensor per entry of `params` and returns a scalar
    Tensor; it must work for constant tensors too (forward-only evaluation).
    When the parameter count exceeds max_coords, a random subsample of
    coordinates is checked.
    """
    if eps <= 0:
        raise ContractError("eps must be positive")
    rng = np.random.default_rng(0) if rng is None else rng
    params = [np.asarray(p, dtype=np.float64) for p in params]

    tape = Tape()
    leaves = [tape.leaf(p) for p in params]
    tape.backward(loss_fn(*leaves))
    ad = [tape.grad(l) for l in leaves]

    def eval_at(arrays):
        out = loss_fn(*[Tensor(a) for a in arrays])
        return float(out.values.reshape(()))

    sizes = [p.size for p in params]
    total = int(np.sum(sizes))
    coords = np.arange(total)
    if total > max_coords:
        coords = rng.choice(total, size=max_coords, replace=False)

    # relative-error floor scales with the gradient magnitude so that
    # exactly-zero coordinates compare against rounding noise sensibly
    scale = max(float(np.max(np.abs(g), initial=0.0)) for g in ad)
    floor = 1e-6 * max(1.0, scale)

    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in coords:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        j = int(flat - offsets[k])
        perturbed = [p.copy() for p in params]
        perturbed[k].flat[j] += eps
        f_plus = eval_at(perturbed)
        perturbed[k].flat[j] -= 2 * eps
        f_minus = eval_at(perturbed)
        fd = (f_plus - f_minus) / (2 * eps)
        a = ad[k].flat[j]
        err = abs(a - fd) / max(abs(a), abs(fd), floor)
        worst = max(worst, err)
    return worst
