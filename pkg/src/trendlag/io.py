"""Files in, validated data out: incident and trend CSV schemas with strict
validation, canonical re-serialization (ingestion is lossless), and the flat
``key = value`` run configuration.

Schemas:
  incidents.csv  header ``date,bias,offense`` (only ``date`` required),
                 ISO-8601 dates, UTF-8.
  trends.csv     header ``week_start,<name>,...``; ISO dates advancing by
                 exactly 7 days; integer values in [0, 100].
"""

from __future__ import annotations

import csv
import hashlib
import io as io_mod
from dataclasses import dataclass, fields
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from trendlag.importance import ExperimentPlan
from trendlag.nn.layers import NetworkSpec
from trendlag.series import SCALED, IncidentRecord, WeeklySeries
from trendlag.train import TrainConfig

INCIDENT_COLUMNS = ("date", "bias", "offense")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _parse_iso_date(text: str, where: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise ValueError(f"{where}: invalid ISO date {text.strip()!r}") from None


def parse_incidents(path: str | Path) -> list[IncidentRecord]:
    """Read an incident table; row numbers are retained for diagnostics."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (no header row)") from None
        header = [h.strip() for h in header]
        if "date" not in header:
            raise ValueError(f"{path}: header must include a 'date' column")
        unknown = [h for h in header if h not in INCIDENT_COLUMNS]
        if unknown:
            raise ValueError(
                f"{path}: unknown column(s) {unknown}; expected a subset of "
                f"{','.join(INCIDENT_COLUMNS)}"
            )
        col = {name: header.index(name) for name in header}
        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path} row {row_no}: expected {len(header)} cells, got {len(row)}")
            d = _parse_iso_date(row[col["date"]], f"{path} row {row_no}")
            records.append(
                IncidentRecord(
                    date=d,
                    bias=row[col["bias"]].strip() if "bias" in col else "",
                    offense=row[col["offense"]].strip() if "offense" in col else "",
                    row=row_no,
                )
            )
    if not records:
        raise ValueError(f"{path}: no incident rows")
    return records


def render_incidents(records: list[IncidentRecord]) -> str:
    """Canonical serialization; parse(render(x)) round-trips losslessly."""
    out = io_mod.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(INCIDENT_COLUMNS)
    for rec in records:
        writer.writerow([rec.date.isoformat(), rec.bias, rec.offense])
    return out.getvalue()


def parse_trends(path: str | Path) -> dict[str, WeeklySeries]:
    """Read a wide-format trends table: one 0-100 integer column per series."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file (no header row)") from None
        if not header or header[0] != "week_start":
            raise ValueError(f"{path}: first column must be 'week_start'")
        names = header[1:]
        if not names:
            raise ValueError(f"{path}: no series columns")
        if len(set(names)) != len(names):
            raise ValueError(f"{path}: duplicate series names in header")

        epoch: date | None = None
        expected: date | None = None
        columns: list[list[float]] = [[] for _ in names]
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path} row {row_no}: expected {len(header)} cells, got {len(row)}")
            week = _parse_iso_date(row[0], f"{path} row {row_no}")
            if epoch is None:
                epoch = week
            elif week != expected:
                if expected is not None and week > expected:
                    raise ValueError(
                        f"{path} row {row_no}: missing week {expected.isoformat()}"
                    )
                raise ValueError(
                    f"{path} row {row_no}: week_start {week.isoformat()} breaks the "
                    f"7-day cadence (expected {expected.isoformat()})"
                )
            expected = week + timedelta(days=7)
            for j, name in enumerate(names):
                cell = row[1 + j].strip()
                try:
                    value = int(cell)
                except ValueError:
                    raise ValueError(
                        f"{path} row {row_no}, column {name!r}: {cell!r} is not an integer"
                    ) from None
                if not 0 <= value <= 100:
                    raise ValueError(
                        f"{path} row {row_no}, column {name!r}: value {value} outside [0, 100]"
                    )
                columns[j].append(float(value))
    if epoch is None:
        raise ValueError(f"{path}: no data rows")
    return {
        name: WeeklySeries(epoch, np.array(col), SCALED, name=name)
        for name, col in zip(names, columns)
    }


def render_trends(series: dict[str, WeeklySeries]) -> str:
    """Canonical wide-format serialization of calendar-aligned trend series."""
    if not series:
        raise ValueError("no series to render")
    lengths = {len(s) for s in series.values()}
    epochs = {s.epoch for s in series.values()}
    if len(lengths) != 1 or len(epochs) != 1:
        raise ValueError("trend series must share epoch and length")
    epoch = next(iter(epochs))
    n = next(iter(lengths))
    out = io_mod.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["week_start", *series.keys()])
    for i in range(n):
        week = epoch + timedelta(days=7 * i)
        writer.writerow([week.isoformat(), *(f"{s.values[i]:.0f}" for s in series.values())])
    return out.getvalue()


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every field maps to one ``key = value`` line."""

    incidents: str = ""
    trends: str = ""
    outdir: str = "out"
    epoch: date = date(2015, 1, 1)
    end: date = date(2020, 1, 8)
    features: tuple[str, ...] = ()  # empty tuple = every column in the trends file
    lags: tuple[int, ...] = (-1, 0, 1, 2, 3)
    permutations: int = 3
    seed: int = 0
    split_fraction: float = 0.8
    batch_size: int = 4
    max_epochs: int = 500
    early_stop_patience: int = 15
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    min_lr: float = 1e-9
    initial_lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle: bool = False
    kernel_size: int = 3
    conv_filters: tuple[int, ...] = (32, 64, 128)
    dense_units: int = 1024
    dropout_p: float = 0.30

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience,
            plateau_patience=self.plateau_patience,
            plateau_factor=self.plateau_factor,
            min_lr=self.min_lr,
            initial_lr=self.initial_lr,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.seed,
            shuffle=self.shuffle,
        )

    def network_spec(self) -> NetworkSpec:
        return NetworkSpec(
            conv_filters=self.conv_filters,
            kernel_size=self.kernel_size,
            dense_units=self.dense_units,
            dropout_p=self.dropout_p,
        )

    def plan(self, target_id: str, feature_ids: tuple[str, ...]) -> ExperimentPlan:
        return ExperimentPlan(
            target_id=target_id,
            feature_ids=feature_ids,
            lags=self.lags,
            permutations=self.permutations,
            seed=self.seed,
            train=self.train_config(),
            network=self.network_spec(),
            split_fraction=self.split_fraction,
        )


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def _parse_value(field_type: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if field_type == "str":
            return raw
        if field_type == "int":
            return int(raw)
        if field_type == "float":
            return float(raw)
        if field_type == "bool":
            if raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise ValueError
        if field_type == "date":
            return date.fromisoformat(raw)
        if field_type == "tuple[str, ...]":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if field_type == "tuple[int, ...]":
            return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r} as {field_type}") from None
    raise AssertionError(f"unhandled config field type {field_type}")


def render_config(cfg: RunConfig) -> str:
    """Canonical text with every key present (defaults expanded)."""
    lines = ["# trendlag run configuration (all keys explicit)"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_render_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys error."""
    known = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(
                f"config line {line_no}: unknown key {key!r} "
                f"(valid keys: {', '.join(sorted(known))})"
            )
        if key in values:
            raise ValueError(f"config line {line_no}: duplicate key {key!r}")
        values[key] = _parse_value(known[key], value, key)
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
