#!/usr/bin/env python3
"""Compare the compiled and pure-numpy kernel backends.

Times the two hot kernels on representative shapes, then a full
forward+backward automaton rollout with each backend.  Run after an editable
install:

    OPENBLAS_NUM_THREADS=1 python benchmarks/bench_kernels.py
"""

import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np

from steernca import autodiff as ad
from steernca import kernels
from steernca.kernels import numpy_backend
from steernca.model import ModelConfig, ModelParams, alive_mask, nca_step

try:
    from steernca.kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, repeats=50):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e3


def bench_kernels():
    rng = np.random.default_rng(0)
    shapes = [(4, 24, 24, 10), (8, 48, 48, 16), (8, 72, 72, 16)]
    kernel = np.array([[1, 2, 1], [2, -12, 2], [1, 2, 1]], dtype=np.float32)
    print(f"{'shape':>16} {'op':>10} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for shape in shapes:
        x = rng.standard_normal(shape).astype(np.float32)
        alpha = np.ascontiguousarray(x[:, :, :, 0])
        rows = [("conv3x3", lambda b: b.conv3x3(x, kernel)),
                ("maxpool3x3", lambda b: b.maxpool3x3(alpha))]
        for name, call in rows:
            t_np = timeit(lambda: call(numpy_backend))
            if _speedups is None:
                print(f"{str(shape):>16} {name:>10} {t_np:10.3f} {'n/a':>12}")
                continue
            t_cy = timeit(lambda: call(_speedups))
            print(f"{str(shape):>16} {name:>10} {t_np:10.3f} {t_cy:12.3f} "
                  f"{t_np / t_cy:7.1f}x")


def bench_rollout(backend_name):
    os.environ["STEERNCA_KERNELS"] = backend_name
    import importlib

    importlib.reload(kernels)
    cfg = ModelConfig(variant="angle", channels=10, hidden=48, p_update=0.5,
                      dtype="float32")
    rng = np.random.default_rng(0)
    params = ModelParams.initialize(cfg, rng)
    params.w1 = (rng.standard_normal(params.w1.shape) * 0.001).astype(np.float32)
    state = np.zeros((4, 24, 24, 10), dtype=np.float32)
    state[:, 8:16, 8:16, :] = rng.random((4, 8, 8, 10)).astype(np.float32) * 0.5
    state[:, 8:16, 8:16, 3] = 0.6
    state *= alive_mask(state, 0.1)

    def rollout_step():
        tape = ad.Tape()
        pt = params.on_tape(tape)
        s = tape.leaf(state)
        for _ in range(20):
            s = nca_step(s, pt, cfg, rng)
        tape.backward(ad.sum_all(ad.mul(s, s)))

    ms = timeit(rollout_step, repeats=10)
    print(f"{backend_name:>10}: 20-step train rollout fwd+bwd {ms:8.1f} ms "
          f"({ms / 20:.2f} ms/step)")


def main():
    print(f"active backend: {kernels.BACKEND}\n")
    bench_kernels()
    print()
    for name in ("numpy", "compiled") if _speedups else ("numpy",):
        bench_rollout(name)


if __name__ == "__main__":
    main()
