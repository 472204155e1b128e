import math
from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from trendlag import rng as rng_mod
from trendlag.nn import NetworkSpec, Parameter, build_network
from trendlag.series import (
    SCALED,
    WeeklySeries,
    build_feature_matrix,
    chronological_split,
    stack_inputs,
    stack_targets,
)
from trendlag.train import (
    Adam,
    EarlyStopping,
    PlateauScheduler,
    TrainConfig,
    TrainingDivergedError,
    mse_loss,
    render_training_log,
    train,
)

EPOCH = date(2015, 1, 1)

TINY_SPEC = NetworkSpec(conv_filters=(6, 8), kernel_size=3, dense_units=12, dropout_p=0.30)
FAST_CFG = TrainConfig(max_epochs=12, seed=5)


def wave_dataset(t=90, noise=0.0, seed=0):
    """Smooth periodic target: easy signal the net can learn from history."""
    idx = np.arange(t)
    vals = 50 + 30 * np.sin(2 * np.pi * idx / 26)
    if noise:
        vals = vals + rng_mod.stream(seed, "test/wave-noise").normal(0, noise, t)
    vals = np.clip(vals, 0, 100)
    target = WeeklySeries(EPOCH, vals, SCALED, name="wave")
    return chronological_split(build_feature_matrix(target), 0.8)


class TestMseLoss:
    def test_equal_inputs_zero(self):
        x = np.random.default_rng(0).standard_normal((3, 4))
        assert mse_loss(x, x.copy()) == 0.0

    def test_hand_arithmetic(self):
        assert mse_loss(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 12.5

    def test_matches_naive_summation(self):
        g = np.random.default_rng(4)
        pred = g.standard_normal((8, 4))
        target = g.standard_normal((8, 4))
        acc = 0.0
        for i in range(8):
            for j in range(4):
                acc += (pred[i, j] - target[i, j]) ** 2
        assert abs(mse_loss(pred, target) - acc / 32) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            mse_loss(np.zeros((2, 4)), np.zeros((3, 4)))


class TestAdam:
    def test_single_step_hand_computed(self):
        # theta=1, g=2, lr=1e-3: m_hat=2, v_hat=4, theta -> 1 - 1e-3*2/(2+1e-8)
        p = Parameter("theta", np.array([1.0]))
        opt = Adam([p], lr=1e-3)
        p.grad[...] = 2.0
        opt.step()
        expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8)
        assert abs(p.value[0] - expected) < 1e-15
        assert abs(opt.m[0][0] - 0.2) < 1e-15
        assert abs(opt.v[0][0] - 0.004) < 1e-15

    def test_zero_gradient_no_move(self):
        p = Parameter("theta", np.array([3.0]))
        opt = Adam([p], lr=1e-3)
        p.grad[...] = 0.0
        opt.step()
        assert p.value[0] == 3.0

    def test_descent_on_quadratic(self):
        # scripted oracle: |theta| decreases monotonically while above 0.5
        p = Parameter("theta", np.array([1.0]))
        opt = Adam([p], lr=0.01)
        prev = 1.0
        for _ in range(100):
            p.grad[...] = 2.0 * p.value
            opt.step()
            cur = abs(float(p.value[0]))
            if prev > 0.5:
                assert cur < prev
            prev = cur
        assert abs(float(p.value[0])) < 0.5

    def test_ten_step_trace_vs_hand_scripted(self):
        # f(theta) = (theta - 3)^2 from theta = 1; both sides step 10 times
        p = Parameter("theta", np.array([1.0]))
        opt = Adam([p], lr=1e-3)
        theta = 1.0
        m = v = 0.0
        beta1, beta2, eps, lr = 0.9, 0.999, 1e-8, 1e-3
        for t in range(1, 11):
            g = 2.0 * (theta - 3.0)
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)

            p.grad[...] = 2.0 * (p.value - 3.0)
            opt.step()
            assert abs(float(p.value[0]) - theta) < 1e-10

    def test_non_finite_gradient_names_parameter(self):
        p = Parameter("dense0.weight", np.array([1.0]))
        opt = Adam([p], lr=1e-3)
        p.grad[...] = np.nan
        with pytest.raises(Exception, match="dense0.weight"):
            opt.step()


class TestEarlyStopping:
    def test_monotone_improvement_never_stops(self):
        early = EarlyStopping(15)
        for loss in range(100, 0, -1):
            assert early.update(float(loss))
        assert not early.should_stop

    def test_fires_after_exactly_patience(self):
        early = EarlyStopping(15)
        early.update(5.0)
        for i in range(14):
            early.update(6.0)
            assert not early.should_stop
        early.update(6.0)
        assert early.should_stop

    def test_reset_on_improvement(self):
        early = EarlyStopping(15)
        early.update(5.0)
        for _ in range(14):
            early.update(6.0)
        assert early.update(4.0)
        assert not early.should_stop
        assert early.counter == 0

    def test_tie_counts_as_non_improvement(self):
        early = EarlyStopping(2)
        early.update(5.0)
        early.update(5.0)
        early.update(5.0)
        assert early.should_stop


class TestPlateauScheduler:
    def test_reduces_after_five_flat_epochs(self):
        sched = PlateauScheduler(1e-3, patience=5, factor=0.1, min_lr=1e-9)
        sched.update(1.0)
        for i in range(4):
            assert not sched.update(2.0)
        assert sched.update(2.0)
        assert abs(sched.lr - 1e-4) < 1e-18

    def test_floor_at_min_lr(self):
        sched = PlateauScheduler(1e-8, patience=1, factor=0.1, min_lr=1e-9)
        sched.update(1.0)
        sched.update(2.0)
        assert sched.lr == 1e-9
        sched.update(2.0)
        assert sched.lr == 1e-9

    def test_improving_sequence_untouched(self):
        sched = PlateauScheduler(1e-3, patience=5, factor=0.1, min_lr=1e-9)
        for loss in [5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.25]:
            sched.update(loss)
        assert sched.lr == 1e-3

    def test_counter_resets_after_reduction(self):
        sched = PlateauScheduler(1e-3, patience=2, factor=0.1, min_lr=1e-9)
        sched.update(1.0)
        sched.update(2.0)
        assert sched.update(2.0)  # reduced
        assert not sched.update(2.0)  # counter restarted
        assert sched.update(2.0)  # second reduction


class TestTrain:
    def test_deterministic_given_seed(self):
        data = wave_dataset()
        a = train(TINY_SPEC, data, FAST_CFG)
        b = train(TINY_SPEC, data, FAST_CFG)
        assert a.checksum == b.checksum
        assert a.history == b.history

    def test_seed_changes_outcome(self):
        data = wave_dataset()
        a = train(TINY_SPEC, data, FAST_CFG)
        b = train(TINY_SPEC, data, replace(FAST_CFG, seed=6))
        assert a.checksum != b.checksum

    def test_run_label_isolates_streams(self):
        data = wave_dataset()
        a = train(TINY_SPEC, data, FAST_CFG, run_label="cell-a")
        b = train(TINY_SPEC, data, FAST_CFG, run_label="cell-b")
        assert a.checksum != b.checksum

    def test_restored_weights_reproduce_best_val_loss(self):
        data = wave_dataset(noise=5.0)
        model = train(TINY_SPEC, data, replace(FAST_CFG, max_epochs=25))
        re_eval = model.validation_loss_of(data)
        assert abs(re_eval - model.best_val_loss) < 1e-9

    def test_lr_non_increasing_and_floored(self):
        data = wave_dataset(noise=5.0)
        cfg = replace(FAST_CFG, max_epochs=40, initial_lr=1e-8, plateau_patience=2)
        model = train(TINY_SPEC, data, cfg)
        lrs = [rec.lr for rec in model.history]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))
        assert min(lrs) >= cfg.min_lr

    def test_early_stop_reports_best_epoch_before_stop(self):
        data = wave_dataset(noise=8.0)
        cfg = replace(FAST_CFG, max_epochs=200, early_stop_patience=5)
        model = train(TINY_SPEC, data, cfg)
        if model.stop_reason == "early_stopping":
            assert model.best_epoch < len(model.history)
            assert model.history[-1].events[-1] == "early_stop"
        assert model.best_epoch >= 1

    def test_easy_signal_reaches_low_mae(self):
        # planted easy-signal oracle: target is exactly half a smooth periodic
        # feature, so the fit should approach zero validation error
        idx = np.arange(130)
        x = 50 + 45 * np.sin(2 * np.pi * idx / 13)
        feature = WeeklySeries(EPOCH, x, SCALED, name="wave")
        target = WeeklySeries(EPOCH, 0.5 * x, SCALED, name="target")
        data = chronological_split(build_feature_matrix(target, feature, 0), 0.8)
        cfg = TrainConfig(max_epochs=300, seed=1, early_stop_patience=40,
                          plateau_patience=15, plateau_factor=0.5, shuffle=True)
        spec = NetworkSpec(conv_filters=(8, 12), kernel_size=3, dense_units=24, dropout_p=0.0)
        model = train(spec, data, cfg)
        preds = model.predict(stack_inputs(data.validation))
        mae = float(np.mean(np.abs(preds - stack_targets(data.validation))))
        assert mae < 1.0

    def test_divergence_aborts_with_epoch(self):
        data = wave_dataset()
        cfg = replace(FAST_CFG, initial_lr=1e160, max_epochs=30)
        with pytest.raises(TrainingDivergedError, match="epoch"):
            train(TINY_SPEC, data, cfg)

    def test_partial_final_batch_handled(self):
        data = wave_dataset(t=47)  # 29 training windows: 7 full batches + 1
        model = train(TINY_SPEC, data, replace(FAST_CFG, max_epochs=3))
        assert len(model.history) == 3

    def test_trace_reproducible_by_independent_update_equations(self):
        # dropout off, fixed lr: 10 steps must match a hand-coded Adam applied
        # to gradients from an identically-initialized twin network
        data = wave_dataset(t=47)
        x = stack_inputs(data.train)
        y = stack_targets(data.train)
        spec = replace(TINY_SPEC, dropout_p=0.0)

        def fresh_net():
            net = build_network(spec, in_len=x.shape[1], in_channels=x.shape[2])
            net.initialize(lambda name: rng_mod.stream(3, f"init/trace/{name}"))
            return net

        net_a = fresh_net()
        opt = Adam(net_a.parameters(), lr=1e-3)

        net_b = fresh_net()
        m = {p.name: np.zeros_like(p.value) for p in net_b.parameters()}
        v = {p.name: np.zeros_like(p.value) for p in net_b.parameters()}

        for step in range(1, 11):
            batch = slice((step - 1) % 5 * 4, (step - 1) % 5 * 4 + 4)
            for net in (net_a, net_b):
                net.zero_grad()
                out = net.forward(x[batch], train=True)
                net.backward(2.0 * (out - y[batch]) / out.size)
            opt.step()
            for p in net_b.parameters():
                m[p.name] = 0.9 * m[p.name] + 0.1 * p.grad
                v[p.name] = 0.999 * v[p.name] + 0.001 * p.grad**2
                m_hat = m[p.name] / (1 - 0.9**step)
                v_hat = v[p.name] / (1 - 0.999**step)
                p.value = p.value - 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8)
            for pa, pb in zip(net_a.parameters(), net_b.parameters()):
                assert np.max(np.abs(pa.value - pb.value)) < 1e-10

    def test_training_log_renders_every_epoch(self):
        data = wave_dataset()
        model = train(TINY_SPEC, data, replace(FAST_CFG, max_epochs=4))
        text = render_training_log(model)
        assert text.count("\n") == 4 + 4  # header block + one line per epoch
        assert "weight_checksum" in text


class TestTrainConfigValidation:
    def test_rejects_bad_factor(self):
        with pytest.raises(ValueError, match="factor"):
            TrainConfig(plateau_factor=1.5)

    def test_rejects_zero_patience(self):
        with pytest.raises(ValueError, match="patience"):
            TrainConfig(early_stop_patience=0)

    def test_rejects_nonpositive_lr(self):
        with pytest.raises(ValueError, match="rate"):
            TrainConfig(initial_lr=0.0)
