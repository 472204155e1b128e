"""Render a grid report to files: grid.csv, heatmap.svg, provenance.txt and
the full-precision gridreport.json it can be re-rendered from.

Rendered MAE values are shown to 2 decimal places; the JSON store keeps full
precision. Outputs contain no timestamps, so re-emitting the same report
produces byte-identical files.
"""

from __future__ import annotations

import csv
import io as io_mod
import math
from pathlib import Path

import numpy as np

from trendlag.importance import GridReport

# Fig-4-style convention: below baseline = purple (better), above = green
_PURPLE = (106, 61, 154)
_GREEN = (51, 160, 44)

_CELL_W = 86
_CELL_H = 26
_LEFT = 250
_TOP = 64


def sorted_feature_order(report: GridReport) -> list[str]:
    """Features sorted by their mean MAE across lags, highest first."""
    by_feature: dict[str, list[float]] = {}
    for cell in report.cells:
        by_feature.setdefault(cell.feature_id, [])
        if not math.isnan(cell.mae_original):
            by_feature[cell.feature_id].append(cell.mae_original)
    def mean_mae(name: str) -> float:
        vals = by_feature[name]
        return float(np.mean(vals)) if vals else math.inf
    return sorted(by_feature, key=lambda name: (-mean_mae(name), name))


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.2f}"


def render_grid_csv(report: GridReport) -> str:
    k = int(report.provenance.get("permutations", max((len(c.perm_maes) for c in report.cells), default=0)))
    out = io_mod.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["feature", "lag", "mae_original", "mae_baseline"]
        + [f"perm_mae_{i}" for i in range(1, k + 1)]
        + ["pi", "improves", "significant"]
    )
    lags = sorted({c.lag for c in report.cells})
    for feature in sorted_feature_order(report):
        for lag in lags:
            try:
                cell = report.cell(feature, lag)
            except KeyError:
                continue
            perm_cols = [_fmt(cell.perm_maes[i]) if i < len(cell.perm_maes) else "" for i in range(k)]
            writer.writerow(
                [
                    cell.feature_id,
                    cell.lag,
                    _fmt(cell.mae_original),
                    _fmt(cell.mae_baseline),
                    *perm_cols,
                    _fmt(cell.pi),
                    str(cell.improves).lower(),
                    str(cell.significant).lower(),
                ]
            )
    return out.getvalue()


def _cell_color(mae: float, baseline: float, max_dev: float) -> str:
    if math.isnan(mae):
        return "#dddddd"
    dev = mae - baseline
    frac = min(abs(dev) / max_dev, 1.0) if max_dev > 0 else 0.0
    tone = _PURPLE if dev < 0 else _GREEN
    r = round(255 + (tone[0] - 255) * frac)
    g = round(255 + (tone[1] - 255) * frac)
    b = round(255 + (tone[2] - 255) * frac)
    return f"#{r:02x}{g:02x}{b:02x}"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_heatmap_svg(report: GridReport) -> str:
    """Feature x lag heat map keyed to the baseline, asterisks on significant cells."""
    features = sorted_feature_order(report)
    lags = sorted({c.lag for c in report.cells})
    devs = [
        abs(c.mae_original - report.baseline_mae)
        for c in report.cells
        if not math.isnan(c.mae_original)
    ]
    max_dev = max(devs) if devs else 0.0
    width = _LEFT + _CELL_W * len(lags) + 40
    height = _TOP + _CELL_H * len(features) + 92

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="12">',
        f'<text x="{_LEFT}" y="20" font-size="14">scaled MAE by feature and lag '
        f"(baseline {report.baseline_mae:.2f})</text>",
    ]
    for j, lag in enumerate(lags):
        x = _LEFT + j * _CELL_W + _CELL_W // 2
        parts.append(f'<text x="{x}" y="{_TOP - 10}" text-anchor="middle">lag {lag}</text>')
    for i, feature in enumerate(features):
        y = _TOP + i * _CELL_H
        parts.append(
            f'<text x="{_LEFT - 8}" y="{y + _CELL_H - 9}" text-anchor="end">{_esc(feature)}</text>'
        )
        for j, lag in enumerate(lags):
            x = _LEFT + j * _CELL_W
            try:
                cell = report.cell(feature, lag)
            except KeyError:
                continue
            color = _cell_color(cell.mae_original, report.baseline_mae, max_dev)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL_W - 2}" height="{_CELL_H - 2}" '
                f'fill="{color}" stroke="#888"/>'
            )
            label = _fmt(cell.mae_original) or "err"
            if cell.significant:
                label += "*"
            parts.append(
                f'<text x="{x + (_CELL_W - 2) // 2}" y="{y + _CELL_H - 9}" '
                f'text-anchor="middle">{label}</text>'
            )
    legend_y = _TOP + _CELL_H * len(features) + 28
    parts.append(
        f'<rect x="{_LEFT}" y="{legend_y}" width="16" height="12" fill="#8f6bb5"/>'
        f'<text x="{_LEFT + 22}" y="{legend_y + 11}">below baseline (improves prediction)</text>'
    )
    parts.append(
        f'<rect x="{_LEFT}" y="{legend_y + 20}" width="16" height="12" fill="#7fc37c"/>'
        f'<text x="{_LEFT + 22}" y="{legend_y + 31}">above baseline (worse than baseline)</text>'
    )
    parts.append(
        f'<text x="{_LEFT}" y="{legend_y + 51}">* = improves and permutation importance &gt; 0</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_provenance(report: GridReport) -> str:
    lines = ["trendlag grid report provenance", "=" * 32]
    lines.append(f"baseline_mae = {report.baseline_mae!r}")
    for key, value in report.provenance.items():
        if isinstance(value, dict):
            lines.append(f"{key}:")
            lines.extend(f"  {k} = {v!r}" for k, v in value.items())
        elif isinstance(value, (list, tuple)):
            lines.append(f"{key}:")
            lines.extend(f"  - {v}" for v in value)
        else:
            lines.append(f"{key} = {value!r}")
    errors = [c for c in report.cells if c.error is not None]
    if errors:
        lines.append("cell_errors:")
        lines.extend(f"  - feature={c.feature_id} lag={c.lag}: {c.error}" for c in errors)
    return "\n".join(lines) + "\n"


def emit_grid(report: GridReport, outdir: str | Path) -> dict[str, Path]:
    """Write all report artifacts; returns the paths that were written."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {
            "grid_csv": outdir / "grid.csv",
            "heatmap_svg": outdir / "heatmap.svg",
            "provenance_txt": outdir / "provenance.txt",
            "gridreport_json": outdir / "gridreport.json",
        }
        paths["grid_csv"].write_text(render_grid_csv(report), encoding="utf-8")
        paths["heatmap_svg"].write_text(render_heatmap_svg(report), encoding="utf-8")
        paths["provenance_txt"].write_text(render_provenance(report), encoding="utf-8")
        paths["gridreport_json"].write_text(report.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing report into {outdir}: {exc}") from exc
    return paths


def load_report(path: str | Path) -> GridReport:
    return GridReport.from_json(Path(path).read_text(encoding="utf-8"))
