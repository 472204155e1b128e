"""Calendar-aligned weekly series and the feature pipeline built on them.

Weeks are flat 7-day blocks anchored at a configured epoch date. The module
covers incident aggregation, global-max scaling, lag shifting, seasonal
dummies, sliding windows and the chronological train/validation split.
Missing values (introduced by lag shifts at series boundaries) are carried
as NaN and dropped during feature-matrix assembly, never zero-filled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

RAW_COUNT = "raw-count"
SCALED = "scaled-0-100"

WINDOW_INPUT_LEN = 5
WINDOW_HORIZON = 4

WEEK_ONEHOT = 53
MONTH_ONEHOT = 12


def week_index(d: date, epoch: date) -> int:
    """Bucket index of a date: consecutive 7-day blocks counted from epoch."""
    return (d - epoch).days // 7


def week_start(epoch: date, index: int) -> date:
    return epoch + timedelta(days=7 * index)


def week_of_year(d: date) -> int:
    """1-based position of the date's 7-day block within its year, capped at 53."""
    jan1 = date(d.year, 1, 1)
    return min((d - jan1).days // 7 + 1, WEEK_ONEHOT)


@dataclass(frozen=True)
class CalendarWeek:
    """One 7-day bucket, identified by its index from the epoch date."""

    index: int
    epoch: date

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"week index must be >= 0, got {self.index}")

    @property
    def start(self) -> date:
        return week_start(self.epoch, self.index)


@dataclass
class IncidentRecord:
    """A single dated incident; annotation columns are retained but unused."""

    date: date
    bias: str = ""
    offense: str = ""
    row: int | None = None  # 1-based source row, kept for diagnostics


@dataclass
class WeeklySeries:
    """One value per week bucket; either raw counts or 0-100 scaled values.

    NaN entries mark positions made undefined by a lag shift; they are legal
    only as transient markers and are dropped at feature-matrix assembly.
    """

    epoch: date
    values: np.ndarray
    kind: str
    name: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("weekly series values must be one-dimensional")
        if self.kind not in (RAW_COUNT, SCALED):
            raise ValueError(f"unknown series kind {self.kind!r}")
        present = self.values[~np.isnan(self.values)]
        if self.kind == RAW_COUNT:
            if present.size and (np.any(present < 0) or np.any(present != np.floor(present))):
                raise ValueError(f"raw-count series {self.name!r} must hold integers >= 0")
        else:
            if present.size and (present.min() < 0 or present.max() > 100):
                raise ValueError(f"scaled series {self.name!r} must lie within [0, 100]")

    def __len__(self) -> int:
        return self.values.size


def aggregate_weekly(
    incidents: list[IncidentRecord], epoch: date, end: date, name: str = ""
) -> WeeklySeries:
    """Count incidents per 7-day bucket over [epoch, end].

    Bucket count is ceil((end - epoch + 1 day) / 7 days); a date outside the
    range is rejected with the offending record identified.
    """
    if end < epoch:
        raise ValueError(f"end date {end} precedes epoch {epoch}")
    n_weeks = math.ceil(((end - epoch).days + 1) / 7)
    counts = np.zeros(n_weeks, dtype=np.float64)
    for rec in incidents:
        if rec.date < epoch or rec.date > end:
            where = f" (row {rec.row})" if rec.row is not None else ""
            raise ValueError(
                f"incident date {rec.date.isoformat()} outside [{epoch.isoformat()}, "
                f"{end.isoformat()}]{where}"
            )
        counts[week_index(rec.date, epoch)] += 1
    return WeeklySeries(epoch, counts, RAW_COUNT, name=name)


def scale_global_max(series: WeeklySeries) -> WeeklySeries:
    """Rescale so the global maximum maps to exactly 100."""
    if np.isnan(series.values).any():
        raise ValueError("cannot scale a series with missing values")
    vmax = series.values.max() if len(series) else 0.0
    if vmax <= 0:
        raise ValueError(f"cannot scale series {series.name!r}: global maximum is not positive")
    return WeeklySeries(series.epoch, 100.0 * series.values / vmax, SCALED, name=series.name)


def apply_lag(series: WeeklySeries, delta: int) -> WeeklySeries:
    """Shift values so out[i] = in[i - delta]; uncovered positions become NaN.

    delta = -1 pushes the series forward one week (out[i] = in[i + 1]).
    """
    n = len(series)
    if abs(delta) >= n:
        raise ValueError(f"|lag| must be < series length {n}, got {delta}")
    out = np.full(n, np.nan)
    if delta >= 0:
        out[delta:] = series.values[: n - delta]
    else:
        out[:delta] = series.values[-delta:]
    return WeeklySeries(series.epoch, out, series.kind, name=series.name)


@dataclass
class FeatureMatrix:
    """Per-week model inputs: target history, optional lagged exogenous value,
    and one-hot week-of-year / month-of-year dummies.

    Rows whose lag-shifted exogenous value is undefined are dropped, so
    ``weeks`` keeps the original bucket index of every surviving row.
    """

    epoch: date
    values: np.ndarray  # (rows, channels)
    target: np.ndarray  # (rows,) scaled target, same numbers as channel 0
    weeks: np.ndarray  # (rows,) original week indices
    channel_names: tuple[str, ...]
    lag: int = 0

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "FeatureMatrix":
        return FeatureMatrix(
            self.epoch,
            self.values[start:stop],
            self.target[start:stop],
            self.weeks[start:stop],
            self.channel_names,
            self.lag,
        )


def build_feature_matrix(
    target: WeeklySeries, feature: WeeklySeries | None = None, lag: int = 0
) -> FeatureMatrix:
    """Assemble the model input matrix from a scaled target and optional feature."""
    if target.kind != SCALED:
        raise ValueError("target series must be scaled to 0-100 before assembly")
    if np.isnan(target.values).any():
        raise ValueError("target series has missing values")
    t = len(target)

    if feature is not None:
        if len(feature) != t:
            raise ValueError(
                f"feature {feature.name!r} has {len(feature)} weeks, target has {t}"
            )
        lagged = apply_lag(feature, lag).values
        keep = ~np.isnan(lagged)
    else:
        lagged = None
        keep = np.ones(t, dtype=bool)

    weeks = np.nonzero(keep)[0]
    rows = weeks.size
    names = ["target"] + (["exog"] if feature is not None else [])
    names += [f"woy_{i}" for i in range(1, WEEK_ONEHOT + 1)]
    names += [f"month_{i}" for i in range(1, MONTH_ONEHOT + 1)]

    values = np.zeros((rows, len(names)))
    values[:, 0] = target.values[weeks]
    col = 1
    if lagged is not None:
        values[:, 1] = lagged[weeks]
        col = 2
    for r, w in enumerate(weeks):
        start = week_start(target.epoch, int(w))
        values[r, col + week_of_year(start) - 1] = 1.0
        values[r, col + WEEK_ONEHOT + start.month - 1] = 1.0

    return FeatureMatrix(
        target.epoch, values, target.values[weeks].copy(), weeks, tuple(names), lag
    )


@dataclass
class WindowSample:
    """Five consecutive input rows mapped to the next four target values."""

    inputs: np.ndarray  # (in_len, channels)
    targets: np.ndarray  # (horizon,)
    input_weeks: np.ndarray
    target_weeks: np.ndarray


def make_windows(
    matrix: FeatureMatrix,
    in_len: int = WINDOW_INPUT_LEN,
    horizon: int = WINDOW_HORIZON,
    stride: int = 1,
) -> list[WindowSample]:
    """Cut stride-1 sliding windows; errors name the minimum row count."""
    need = in_len + horizon
    if matrix.rows < need:
        raise ValueError(f"need at least {need} rows to build windows, got {matrix.rows}")
    samples = []
    for k in range(0, matrix.rows - need + 1, stride):
        samples.append(
            WindowSample(
                inputs=matrix.values[k : k + in_len],
                targets=matrix.target[k + in_len : k + need],
                input_weeks=matrix.weeks[k : k + in_len],
                target_weeks=matrix.weeks[k + in_len : k + need],
            )
        )
    return samples


@dataclass
class SplitDataset:
    """Windows built independently on each side of a chronological cut."""

    train: list[WindowSample]
    validation: list[WindowSample]
    split_fraction: float
    train_rows: int
    validation_rows: int

    def week_sets(self) -> tuple[set[int], set[int]]:
        train_weeks: set[int] = set()
        val_weeks: set[int] = set()
        for sample in self.train:
            train_weeks.update(sample.input_weeks.tolist())
            train_weeks.update(sample.target_weeks.tolist())
        for sample in self.validation:
            val_weeks.update(sample.input_weeks.tolist())
            val_weeks.update(sample.target_weeks.tolist())
        return train_weeks, val_weeks


def chronological_split(
    matrix: FeatureMatrix,
    fraction: float = 0.8,
    in_len: int = WINDOW_INPUT_LEN,
    horizon: int = WINDOW_HORIZON,
) -> SplitDataset:
    """Cut the first floor(fraction * rows) rows for training, window per segment."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must lie strictly between 0 and 1, got {fraction}")
    n_train = int(math.floor(fraction * matrix.rows))
    n_val = matrix.rows - n_train
    need = in_len + horizon
    if n_train < need:
        raise ValueError(f"training segment has {n_train} rows; needs at least {need}")
    if n_val < need:
        raise ValueError(f"validation segment has {n_val} rows; needs at least {need}")
    train = make_windows(matrix.slice(0, n_train), in_len, horizon)
    validation = make_windows(matrix.slice(n_train, matrix.rows), in_len, horizon)
    return SplitDataset(train, validation, fraction, n_train, n_val)


def stack_inputs(samples: list[WindowSample]) -> np.ndarray:
    return np.stack([s.inputs for s in samples])


def stack_targets(samples: list[WindowSample]) -> np.ndarray:
    return np.stack([s.targets for s in samples])
