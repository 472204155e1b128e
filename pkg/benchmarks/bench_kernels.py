#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Times the four hot kernels on the forecaster's production shapes, the fused
Adam update, and one full training run per backend. Backends are forced via
TRENDLAG_BACKEND in subprocesses for the training comparison, so run this
script directly: python benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from trendlag.nn.kernels import available_backends  # noqa: E402

BATCH, IN_LEN = 4, 5
SHAPES = {
    "conv1 (66->32, k3)": ("conv", (BATCH, IN_LEN, 66), (3, 66, 32)),
    "conv2 (32->64, k3)": ("conv", (BATCH, IN_LEN, 32), (3, 32, 64)),
    "conv3 (64->128, k3)": ("conv", (BATCH, IN_LEN, 64), (3, 64, 128)),
    "dense1 (640->1024)": ("dense", (BATCH, 640), (640, 1024)),
    "dense2 (1024->4)": ("dense", (BATCH, 1024), (1024, 4)),
}


def time_callable(fn, repeats=300):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return 1e6 * (time.perf_counter() - start) / repeats


def bench_kernels():
    rng = np.random.default_rng(0)
    backends = available_backends()
    print(f"available backends: {', '.join(sorted(backends))}\n")
    header = f"{'kernel':24s}" + "".join(f"{name + ' fwd':>14s}{name + ' bwd':>14s}" for name in backends)
    print(header)
    for label, (kind, x_shape, w_shape) in SHAPES.items():
        x = rng.standard_normal(x_shape)
        w = rng.standard_normal(w_shape)
        b = rng.standard_normal(w_shape[-1])
        row = f"{label:24s}"
        for mod in backends.values():
            fwd = mod.conv1d_forward if kind == "conv" else mod.dense_forward
            bwd = mod.conv1d_backward if kind == "conv" else mod.dense_backward
            out = fwd(x, w, b)
            gz = np.ones_like(out)
            row += f"{time_callable(lambda: fwd(x, w, b)):>12.1f}us"
            row += f"{time_callable(lambda: bwd(x, w, gz)):>12.1f}us"
        print(row)

    n = 655_360  # the wide dense layer dominates the optimizer's work
    p = rng.standard_normal(n)
    g = rng.standard_normal(n)
    row = f"{'adam update (655K)':24s}"
    for mod in backends.values():
        m = np.zeros(n)
        v = np.zeros(n)
        scratch = np.empty(n)
        state = {"t": 0}

        def step():
            state["t"] += 1
            mod.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, state["t"], scratch)

        row += f"{time_callable(step, repeats=100):>12.1f}us{'':>14s}"
    print(row)


def bench_training():
    print("\nfull training run (paper-size network, 262 synthetic weeks):")
    code = (
        "import time;"
        "from trendlag.importance import ExperimentPlan, train_baseline;"
        "from trendlag.nn import NetworkSpec; from trendlag.nn.kernels import BACKEND;"
        "from trendlag.series import scale_global_max;"
        "from trendlag.synth import SyntheticSpec, generate_synthetic;"
        "from trendlag.train import TrainConfig;"
        "target, _, _ = generate_synthetic(SyntheticSpec(seed=0));"
        "plan = ExperimentPlan('t', (), seed=0, train=TrainConfig(seed=0, max_epochs=20,"
        " early_stop_patience=20), network=NetworkSpec());"
        "start = time.time(); mae, model = train_baseline(scale_global_max(target), plan);"
        "dt = time.time() - start;"
        "print(f'  {BACKEND:8s} 20 epochs in {dt:6.2f}s ({dt / 20:.3f}s/epoch), val MAE {mae:.3f}')"
    )
    for backend in ("cython", "python"):
        env = dict(os.environ, TRENDLAG_BACKEND=backend,
                   PYTHONPATH=os.path.join(os.path.dirname(__file__), "..", "src"))
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        if proc.returncode == 0:
            print(proc.stdout, end="")
        else:
            print(f"  {backend}: unavailable ({proc.stderr.strip().splitlines()[-1]})")


if __name__ == "__main__":
    bench_kernels()
    bench_training()
