"""Built-in oracle suites: gradient checks against finite differences, an
Adam trace against hand-scripted update equations, scheduler firing rules,
permutation validity, and a reduced planted-signal recovery run."""

from __future__ import annotations

import math

import numpy as np

from trendlag import rng as rng_mod
from trendlag.importance import DataBundle, ExperimentPlan, permute_series, run_grid
from trendlag.nn import NetworkSpec, Parameter, build_network
from trendlag.series import SCALED, WeeklySeries, scale_global_max
from trendlag.synth import NOISE_NAME, PLANTED_NAME, SyntheticSpec, generate_synthetic
from trendlag.train import Adam, EarlyStopping, PlateauScheduler, TrainConfig


def _check_gradients(trials: int = 10) -> str | None:
    g = np.random.default_rng(99)
    for trial in range(trials):
        spec = NetworkSpec(
            conv_filters=(3, 4), kernel_size=3, dense_units=6, dropout_p=0.0, horizon=2
        )
        net = build_network(spec, in_len=6, in_channels=3)
        net.initialize(lambda name: rng_mod.stream(trial, f"selftest/init/{name}"))
        for p in net.parameters():
            if p.name.endswith(".bias"):
                p.value = 0.1 * g.standard_normal(p.value.shape)
        x = None
        for _ in range(20):
            cand = g.standard_normal((2, 6, 3))
            net.forward(cand, train=True)
            margins = [
                np.abs(l._z).min() for l in net.layers if getattr(l, "activation", None) == "relu"
            ]
            if min(margins) > 1e-3:
                x = cand
                break
        if x is None:
            continue
        y = g.standard_normal((2, 2))
        out = net.forward(x, train=True)
        net.zero_grad()
        net.backward(2.0 * (out - y) / out.size)
        grads = {p.name: p.grad.copy() for p in net.parameters()}
        h = 1e-5
        for param in net.parameters():
            for _ in range(2):
                i = int(g.integers(param.value.size))
                index = np.unravel_index(i, param.value.shape)
                orig = param.value[index]
                param.value[index] = orig + h
                up = float(np.mean((net.forward(x) - y) ** 2))
                param.value[index] = orig - h
                down = float(np.mean((net.forward(x) - y) ** 2))
                param.value[index] = orig
                fd = (up - down) / (2 * h)
                an = grads[param.name][index]
                if abs(fd - an) / max(abs(fd), abs(an), 1e-8) > 1e-4:
                    return f"{param.name}{list(index)}: fd={fd:.3e} analytic={an:.3e}"
    return None


def _check_adam_trace() -> str | None:
    p = Parameter("theta", np.array([1.0]))
    opt = Adam([p], lr=1e-3)
    theta, m, v = 1.0, 0.0, 0.0
    for t in range(1, 11):
        g = 2.0 * (theta - 3.0)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 1e-3 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
        p.grad[...] = 2.0 * (p.value - 3.0)
        opt.step()
        if abs(float(p.value[0]) - theta) > 1e-10:
            return f"step {t}: {float(p.value[0])!r} vs scripted {theta!r}"
    return None


def _check_schedulers() -> str | None:
    early = EarlyStopping(15)
    early.update(5.0)
    for i in range(15):
        early.update(6.0)
        if early.should_stop and i < 14:
            return f"early stopping fired after {i + 1} non-improvements"
    if not early.should_stop:
        return "early stopping failed to fire after 15 non-improvements"
    sched = PlateauScheduler(1e-3, patience=5, factor=0.1, min_lr=1e-9)
    sched.update(1.0)
    for _ in range(5):
        sched.update(2.0)
    if abs(sched.lr - 1e-4) > 1e-18:
        return f"plateau lr {sched.lr} != 1e-4 after 5 flat epochs"
    floor = PlateauScheduler(1e-9, patience=1, factor=0.1, min_lr=1e-9)
    floor.update(1.0)
    floor.update(2.0)
    if floor.lr != 1e-9:
        return f"lr fell through the floor: {floor.lr}"
    return None


def _check_permutation() -> str | None:
    from datetime import date

    g = rng_mod.stream(0, "selftest/perm")
    series = WeeklySeries(
        date(2015, 1, 1), g.integers(0, 101, 80).astype(float), SCALED, name="perm"
    )
    out = permute_series(series, rng_mod.stream(0, "selftest/perm/k=1"))
    if sorted(out.values.tolist()) != sorted(series.values.tolist()):
        return "permutation did not preserve the value multiset"
    const = WeeklySeries(date(2015, 1, 1), np.full(40, 7.0), SCALED, name="const")
    out = permute_series(const, rng_mod.stream(0, "selftest/perm/k=2"))
    if not np.array_equal(out.values, const.values):
        return "permuting a constant series changed it"
    return None


def _check_planted_recovery() -> str | None:
    spec = SyntheticSpec(seed=5)
    target_raw, planted, noise = generate_synthetic(spec)
    bundle = DataBundle(
        target=scale_global_max(target_raw), features={PLANTED_NAME: planted, NOISE_NAME: noise}
    )
    plan = ExperimentPlan(
        target_id="target",
        feature_ids=(PLANTED_NAME, NOISE_NAME),
        lags=(spec.lag,),
        permutations=3,
        seed=5,
        train=TrainConfig(
            seed=5, max_epochs=150, initial_lr=1e-3, batch_size=4, shuffle=True,
            plateau_patience=12, plateau_factor=0.3, early_stop_patience=30,
        ),
        network=NetworkSpec(conv_filters=(64,), kernel_size=3, dense_units=256, dropout_p=0.0),
    )
    report = run_grid(bundle, plan)
    planted_cell = report.cell(PLANTED_NAME, spec.lag)
    noise_cell = report.cell(NOISE_NAME, spec.lag)
    if not planted_cell.significant:
        return (
            f"planted cell not recovered: mae={planted_cell.mae_original:.3f} "
            f"baseline={report.baseline_mae:.3f} pi={planted_cell.pi}"
        )
    if noise_cell.significant:
        return f"noise feature falsely flagged: pi={noise_cell.pi}"
    return None


def run_selftest(quick: bool = False) -> int:
    checks = [
        ("gradient-vs-finite-differences", _check_gradients),
        ("adam-trace-vs-scripted-updates", _check_adam_trace),
        ("scheduler-state-machines", _check_schedulers),
        ("permutation-validity", _check_permutation),
    ]
    if not quick:
        checks.append(("planted-signal-recovery", _check_planted_recovery))
    failures = 0
    for name, check in checks:
        detail = check()
        if detail is None:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {detail}")
    return 1 if failures else 0
