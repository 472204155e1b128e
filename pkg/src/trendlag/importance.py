"""Grid experiment: baseline-vs-feature comparison across lags, retrain-per-
permutation importance testing, and the two-condition significance rule.

A (feature, lag) cell improves when its validation MAE beats the baseline
strictly; an improving cell is significant when the minimum MAE over K
permuted retrainings still exceeds the original MAE (PI > 0). Cells that do
not improve skip the permutation test. Every random draw is keyed by
(master seed, feature, lag, permutation index) so the grid is deterministic
and insensitive to execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from trendlag import __version__
from trendlag import rng as rng_mod
from trendlag.metrics import scaled_mae
from trendlag.nn.kernels import BACKEND
from trendlag.nn.layers import NetworkSpec
from trendlag.series import (
    SCALED,
    SplitDataset,
    WeeklySeries,
    build_feature_matrix,
    chronological_split,
    stack_inputs,
    stack_targets,
)
from trendlag.train import TrainConfig, TrainedModel, train

DEFAULT_LAGS = (-1, 0, 1, 2, 3)

CAVEATS = (
    "single 80/20 chronological split: the validation segment both steers "
    "early stopping and serves as the out-of-sample benchmark",
    "global-max scaling uses the full series including validation weeks",
    "PI uses the minimum over K permuted runs (best case), which is "
    "anti-conservative; mean and max are recorded for diagnostics",
)


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one grid run."""

    target_id: str
    feature_ids: tuple[str, ...]
    lags: tuple[int, ...] = DEFAULT_LAGS
    permutations: int = 3
    seed: int = 0
    train: TrainConfig = TrainConfig()
    network: NetworkSpec = NetworkSpec()
    split_fraction: float = 0.8

    def __post_init__(self) -> None:
        if len(set(self.lags)) != len(self.lags):
            raise ValueError("lags must be unique")
        if self.permutations < 0:
            raise ValueError("permutation count must be >= 0")

    def cell_config(self) -> TrainConfig:
        # the master seed governs every stream in the grid
        return replace(self.train, seed=self.seed)


@dataclass
class LagCellResult:
    """Outcome of one (feature, lag) experiment."""

    feature_id: str
    lag: int
    mae_original: float
    mae_baseline: float
    perm_maes: tuple[float, ...] = ()
    pi: float | None = None
    improves: bool = False
    significant: bool = False
    perm_skipped: bool = True
    error: str | None = None

    @property
    def perm_mae_mean(self) -> float | None:
        return float(np.mean(self.perm_maes)) if self.perm_maes else None

    @property
    def perm_mae_max(self) -> float | None:
        return float(max(self.perm_maes)) if self.perm_maes else None


@dataclass
class GridReport:
    baseline_mae: float
    cells: list[LagCellResult]
    provenance: dict

    @property
    def partial_failure(self) -> bool:
        return any(c.error is not None for c in self.cells)

    def cell(self, feature_id: str, lag: int) -> LagCellResult:
        for c in self.cells:
            if c.feature_id == feature_id and c.lag == lag:
                return c
        raise KeyError(f"no cell for ({feature_id!r}, {lag})")

    def to_json(self) -> str:
        payload = {
            "baseline_mae": self.baseline_mae,
            "cells": [asdict(c) for c in self.cells],
            "provenance": self.provenance,
        }
        return json.dumps(payload, indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "GridReport":
        raw = json.loads(text)
        cells = []
        for entry in raw["cells"]:
            entry["perm_maes"] = tuple(entry["perm_maes"])
            cells.append(LagCellResult(**entry))
        return cls(raw["baseline_mae"], cells, raw["provenance"])


def series_checksum(series: WeeklySeries) -> str:
    h = hashlib.sha256()
    h.update(series.name.encode())
    h.update(series.epoch.isoformat().encode())
    h.update(series.kind.encode())
    h.update(np.ascontiguousarray(series.values, dtype="<f8").tobytes())
    return h.hexdigest()


def _prepare(
    target: WeeklySeries, feature: WeeklySeries | None, lag: int, plan: ExperimentPlan
) -> SplitDataset:
    matrix = build_feature_matrix(target, feature, lag)
    return chronological_split(matrix, plan.split_fraction)


def validation_mae(model: TrainedModel, data: SplitDataset) -> float:
    preds = model.predict(stack_inputs(data.validation))
    return scaled_mae(preds, stack_targets(data.validation))


def _run_label(target: WeeklySeries, feature: WeeklySeries | None, lag: int) -> str:
    """Training-stream label, keyed by the cell's data content.

    Identical datasets must train identically (a permutation that happens to
    reproduce the series yields PI = 0 exactly), so the label carries a digest
    of the inputs rather than the feature's name or permutation index.
    """
    if feature is None:
        return f"train/baseline/target={series_checksum(target)[:12]}"
    return (
        f"train/lag={lag}/target={series_checksum(target)[:12]}"
        f"/feature={series_checksum(feature)[:12]}"
    )


def train_baseline(target: WeeklySeries, plan: ExperimentPlan) -> tuple[float, TrainedModel]:
    """Fit the history-plus-seasonals model with no exogenous channel."""
    data = _prepare(target, None, 0, plan)
    model = train(plan.network, data, plan.cell_config(), run_label=_run_label(target, None, 0))
    return validation_mae(model, data), model


def evaluate_feature_lag(
    target: WeeklySeries, feature: WeeklySeries, lag: int, plan: ExperimentPlan
) -> tuple[float, TrainedModel]:
    """Fit with the exogenous channel at the given lag; returns validation MAE."""
    data = _prepare(target, feature, lag, plan)
    label = _run_label(target, feature, lag)
    model = train(plan.network, data, plan.cell_config(), run_label=label)
    return validation_mae(model, data), model


def permute_series(series: WeeklySeries, rng: np.random.Generator) -> WeeklySeries:
    """Uniformly shuffle the series values in time; the multiset is preserved."""
    order = rng.permutation(len(series))
    return WeeklySeries(series.epoch, series.values[order], series.kind, name=series.name)


def permutation_test(
    target: WeeklySeries,
    feature: WeeklySeries,
    lag: int,
    plan: ExperimentPlan,
    mae_original: float,
    on_model=None,
) -> tuple[tuple[float, ...], float]:
    """Retrain K times on permuted copies of the raw feature series.

    The permuted series replaces the feature before lagging and windowing,
    and the retrained model is scored on the permuted dataset's validation
    windows. Returns (per-permutation MAEs, PI = min - original).
    """
    maes = []
    for k in range(1, plan.permutations + 1):
        prng = rng_mod.stream(plan.seed, f"perm/feature={feature.name}/lag={lag}/k={k}")
        permuted = permute_series(feature, prng)
        data = _prepare(target, permuted, lag, plan)
        model = train(plan.network, data, plan.cell_config(),
                      run_label=_run_label(target, permuted, lag))
        mae = validation_mae(model, data)
        if on_model is not None:
            on_model(f"feature={feature.name}/lag={lag}/perm={k}", model)
        maes.append(mae)
    return tuple(maes), min(maes) - mae_original


def classify_cell(
    mae_original: float, mae_baseline: float, pi: float | None
) -> tuple[bool, bool]:
    """Apply the two strict conditions: improvement, then PI > 0."""
    improves = mae_original < mae_baseline
    significant = improves and pi is not None and pi > 0
    return improves, significant


@dataclass
class DataBundle:
    """Aligned inputs for a grid run: one scaled target, named feature series."""

    target: WeeklySeries
    features: dict[str, WeeklySeries] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.target.kind != SCALED:
            raise ValueError("grid target must be scaled to 0-100")
        for name, series in self.features.items():
            if len(series) != len(self.target):
                raise ValueError(
                    f"feature {name!r} has {len(series)} weeks, "
                    f"target has {len(self.target)}"
                )

    def checksums(self) -> dict[str, str]:
        sums = {f"target:{self.target.name}": series_checksum(self.target)}
        for name, series in self.features.items():
            sums[f"feature:{name}"] = series_checksum(series)
        return sums


def run_grid(data: DataBundle, plan: ExperimentPlan, on_model=None) -> GridReport:
    """Run the full feature x lag grid; cell failures are recorded, not fatal."""
    missing = [f for f in plan.feature_ids if f not in data.features]
    if missing:
        raise ValueError(f"plan names features absent from the data: {missing}")

    baseline_mae, baseline_model = train_baseline(data.target, plan)
    if on_model is not None:
        on_model("baseline", baseline_model)

    cells: list[LagCellResult] = []
    for feature_id in plan.feature_ids:
        feature = data.features[feature_id]
        for lag in plan.lags:
            try:
                mae_orig, model = evaluate_feature_lag(data.target, feature, lag, plan)
                if on_model is not None:
                    on_model(f"feature={feature_id}/lag={lag}", model)
                improves = mae_orig < baseline_mae
                if improves and plan.permutations >= 1:
                    perm_maes, pi = permutation_test(
                        data.target, feature, lag, plan, mae_orig, on_model
                    )
                    skipped = False
                else:
                    perm_maes, pi, skipped = (), None, True
                improves, significant = classify_cell(mae_orig, baseline_mae, pi)
                cells.append(
                    LagCellResult(
                        feature_id=feature_id,
                        lag=lag,
                        mae_original=mae_orig,
                        mae_baseline=baseline_mae,
                        perm_maes=perm_maes,
                        pi=pi,
                        improves=improves,
                        significant=significant,
                        perm_skipped=skipped,
                    )
                )
            except Exception as exc:  # record and continue with the next cell
                cells.append(
                    LagCellResult(
                        feature_id=feature_id,
                        lag=lag,
                        mae_original=math.nan,
                        mae_baseline=baseline_mae,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )

    provenance = {
        "tool": f"trendlag {__version__}",
        "kernel_backend": BACKEND,
        "rng_algorithm": rng_mod.ALGORITHM,
        "target_id": plan.target_id,
        "feature_ids": list(plan.feature_ids),
        "lags": list(plan.lags),
        "permutations": plan.permutations,
        "master_seed": plan.seed,
        "split_fraction": plan.split_fraction,
        "train_config": asdict(plan.cell_config()),
        "network": asdict(plan.network),
        "data_checksums": data.checksums(),
        "caveats": list(CAVEATS),
    }
    # canonical JSON types, so a report reloaded from disk renders identically
    provenance = json.loads(json.dumps(provenance))
    return GridReport(baseline_mae, cells, provenance)
