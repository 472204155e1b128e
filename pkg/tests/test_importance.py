import math
from datetime import date

import numpy as np
import pytest

from trendlag import rng as rng_mod
from trendlag.importance import (
    DataBundle,
    ExperimentPlan,
    GridReport,
    classify_cell,
    permutation_test,
    permute_series,
    run_grid,
    series_checksum,
    train_baseline,
)
from trendlag.nn import NetworkSpec
from trendlag.series import SCALED, WeeklySeries, scale_global_max
from trendlag.synth import SyntheticSpec, generate_synthetic
from trendlag.train import TrainConfig

EPOCH = date(2015, 1, 1)

# small but realistic setup used across the expensive tests
TINY_NET = NetworkSpec(conv_filters=(4,), kernel_size=3, dense_units=8, dropout_p=0.0)
TINY_CFG = TrainConfig(max_epochs=8, early_stop_patience=4, plateau_patience=3)


def tiny_bundle(seed=0, length=70):
    target_raw, planted, noise = generate_synthetic(SyntheticSpec(length=length, seed=seed))
    return DataBundle(
        target=scale_global_max(target_raw),
        features={"planted": planted, "noise": noise},
    )


def tiny_plan(seed=0, features=("planted",), lags=(0, 2), permutations=1):
    return ExperimentPlan(
        target_id="target",
        feature_ids=features,
        lags=lags,
        permutations=permutations,
        seed=seed,
        train=TINY_CFG,
        network=TINY_NET,
    )


class TestPermuteSeries:
    def test_multiset_preserved(self):
        g = rng_mod.stream(0, "t")
        series = WeeklySeries(EPOCH, g.integers(0, 101, 60).astype(float), SCALED)
        out = permute_series(series, rng_mod.stream(0, "perm"))
        assert sorted(out.values.tolist()) == sorted(series.values.tolist())

    def test_same_stream_same_permutation(self):
        series = WeeklySeries(EPOCH, np.arange(40, dtype=float), SCALED)
        a = permute_series(series, rng_mod.stream(1, "perm/k=1"))
        b = permute_series(series, rng_mod.stream(1, "perm/k=1"))
        assert np.array_equal(a.values, b.values)

    def test_length_one_unchanged(self):
        series = WeeklySeries(EPOCH, np.array([42.0]), SCALED)
        out = permute_series(series, rng_mod.stream(0, "perm"))
        assert np.array_equal(out.values, series.values)

    def test_constant_series_unchanged(self):
        series = WeeklySeries(EPOCH, np.full(30, 7.0), SCALED)
        out = permute_series(series, rng_mod.stream(2, "perm"))
        assert np.array_equal(out.values, series.values)


class TestClassifyCell:
    def test_paper_patterns(self):
        # Great Replacement at lag 3: improving and permutation-validated
        assert classify_cell(11.39, 12.18, 12.72 - 11.39) == (True, True)
        # Q-Anon at lag 2: improves, fails the permutation test
        assert classify_cell(12.13, 12.18, 11.96 - 12.13) == (True, False)
        # boundary: equal to baseline is not an improvement
        assert classify_cell(12.18, 12.18, 1.0) == (False, False)

    def test_skipped_permutation_is_never_significant(self):
        assert classify_cell(10.0, 12.0, None) == (True, False)

    def test_exhaustive_ordering_cases(self):
        # classify is a pure function of the two order relations
        for orig, base in [(1.0, 2.0), (2.0, 1.0), (1.0, 1.0)]:
            for pi in [-0.5, 0.0, 0.5, None]:
                improves, significant = classify_cell(orig, base, pi)
                assert improves == (orig < base)
                assert significant == (improves and pi is not None and pi > 0)


class TestPermutationTest:
    def test_constant_feature_gives_pi_zero(self):
        bundle = tiny_bundle()
        const = WeeklySeries(EPOCH, np.full(70, 50.0), SCALED, name="const")
        plan = tiny_plan(permutations=2)
        from trendlag.importance import evaluate_feature_lag

        mae, _ = evaluate_feature_lag(bundle.target, const, 1, plan)
        perm_maes, pi = permutation_test(bundle.target, const, 1, plan, mae)
        assert pi == 0.0
        assert all(m == mae for m in perm_maes)

    def test_pi_is_min_minus_original(self):
        bundle = tiny_bundle()
        plan = tiny_plan(permutations=2)
        from trendlag.importance import evaluate_feature_lag

        feature = bundle.features["planted"]
        mae, _ = evaluate_feature_lag(bundle.target, feature, 0, plan)
        perm_maes, pi = permutation_test(bundle.target, feature, 0, plan, mae)
        assert len(perm_maes) == 2
        assert pi == min(perm_maes) - mae


class TestRunGrid:
    def test_cell_count_and_structure(self):
        report = run_grid(tiny_bundle(), tiny_plan(features=("planted", "noise")))
        assert len(report.cells) == 2 * 2  # features x lags
        assert {(c.feature_id, c.lag) for c in report.cells} == {
            ("planted", 0), ("planted", 2), ("noise", 0), ("noise", 2),
        }

    def test_zero_permutations_single_evaluate_cell(self):
        plan = tiny_plan(features=("planted",), lags=(2,), permutations=0)
        report = run_grid(tiny_bundle(), plan)
        assert len(report.cells) == 1
        cell = report.cells[0]
        assert cell.perm_skipped and cell.pi is None and not cell.significant

    def test_skipped_permutation_rule(self):
        report = run_grid(tiny_bundle(), tiny_plan(features=("planted", "noise")))
        for cell in report.cells:
            if cell.improves:
                assert not cell.perm_skipped and len(cell.perm_maes) == 1
                assert cell.pi == min(cell.perm_maes) - cell.mae_original
            else:
                assert cell.perm_skipped and cell.pi is None

    def test_deterministic_byte_for_byte(self):
        a = run_grid(tiny_bundle(), tiny_plan())
        b = run_grid(tiny_bundle(), tiny_plan())
        assert a.to_json() == b.to_json()

    def test_cell_failure_recorded_not_fatal(self):
        bundle = tiny_bundle()
        plan = tiny_plan(lags=(0, 65))  # |lag| close to series length: windowing fails
        report = run_grid(bundle, plan)
        failed = report.cell("planted", 65)
        assert failed.error is not None
        assert math.isnan(failed.mae_original)
        assert report.partial_failure
        ok = report.cell("planted", 0)
        assert ok.error is None

    def test_unknown_feature_rejected(self):
        with pytest.raises(ValueError, match="absent"):
            run_grid(tiny_bundle(), tiny_plan(features=("ghost",)))

    def test_provenance_contents(self):
        report = run_grid(tiny_bundle(), tiny_plan())
        prov = report.provenance
        assert prov["master_seed"] == 0
        assert prov["permutations"] == 1
        assert "data_checksums" in prov and "target:target" in prov["data_checksums"]
        assert prov["train_config"]["seed"] == 0

    def test_json_roundtrip(self):
        report = run_grid(tiny_bundle(), tiny_plan())
        back = GridReport.from_json(report.to_json())
        assert back.to_json() == report.to_json()
        assert back.baseline_mae == report.baseline_mae

    def test_on_model_callback_sees_all_runs(self):
        labels = []
        run_grid(tiny_bundle(), tiny_plan(), on_model=lambda label, model: labels.append(label))
        assert "baseline" in labels
        assert any(label.startswith("feature=planted/lag=0") for label in labels)


class TestChecksums:
    def test_series_checksum_tracks_values(self):
        s1 = WeeklySeries(EPOCH, np.arange(20, dtype=float), SCALED, name="a")
        s2 = WeeklySeries(EPOCH, np.arange(20, dtype=float), SCALED, name="a")
        assert series_checksum(s1) == series_checksum(s2)
        s2.values[3] += 1
        assert series_checksum(s1) != series_checksum(s2)


class TestDataBundle:
    def test_rejects_raw_target(self):
        t, p, n = generate_synthetic(SyntheticSpec(length=70, seed=0))
        with pytest.raises(ValueError, match="scaled"):
            DataBundle(target=t, features={})

    def test_rejects_misaligned_feature(self):
        bundle_target = scale_global_max(generate_synthetic(SyntheticSpec(length=70, seed=0))[0])
        short = WeeklySeries(EPOCH, np.zeros(30), SCALED, name="short")
        with pytest.raises(ValueError, match="weeks"):
            DataBundle(target=bundle_target, features={"short": short})


class TestBaseline:
    def test_deterministic_repeat(self):
        bundle = tiny_bundle()
        plan = tiny_plan()
        a, _ = train_baseline(bundle.target, plan)
        b, _ = train_baseline(bundle.target, plan)
        assert a == b


class TestPaperScaleGridShape:
    def test_36_features_5_lags_yield_180_cells(self):
        # structure only: tiny series and network, no permutations
        target_raw, planted, _ = generate_synthetic(SyntheticSpec(length=60, seed=1))
        features = {}
        for i in range(36):
            g = rng_mod.stream(i, "grid-shape/feature")
            values = np.clip(np.round(50 + np.cumsum(g.integers(-3, 4, 60))), 0, 100)
            features[f"t{i:02d}"] = WeeklySeries(EPOCH, values, SCALED, name=f"t{i:02d}")
        bundle = DataBundle(target=scale_global_max(target_raw), features=features)
        plan = ExperimentPlan(
            target_id="target",
            feature_ids=tuple(features),
            lags=(-1, 0, 1, 2, 3),
            permutations=0,
            seed=0,
            train=TrainConfig(max_epochs=2, early_stop_patience=2, plateau_patience=1),
            network=NetworkSpec(conv_filters=(2,), kernel_size=1, dense_units=4, dropout_p=0.0),
        )
        report = run_grid(bundle, plan)
        assert len(report.cells) == 180
        assert len({(c.feature_id, c.lag) for c in report.cells}) == 180
        assert all(c.error is None for c in report.cells)
