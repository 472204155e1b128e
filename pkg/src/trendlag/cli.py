"""Command-line surface: ingest, grid, synth, report, selftest.

Exit codes: 0 success, 1 usage or validation failure, 2 partial grid failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from trendlag import __version__
from trendlag import io as tio
from trendlag.importance import DataBundle, run_grid
from trendlag.report import emit_grid, load_report
from trendlag.series import IncidentRecord, aggregate_weekly, scale_global_max, week_start
from trendlag.synth import NOISE_NAME, PLANTED_NAME, SyntheticSpec, generate_synthetic
from trendlag.train import render_training_log

TARGET_NAME = "target"


class CliError(Exception):
    """Validation failure that should exit with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, per the documented codes
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="trendlag", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trendlag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate and normalize input CSVs")
    p_ingest.add_argument("--incidents", required=True)
    p_ingest.add_argument("--trends", required=True)
    p_ingest.add_argument("--outdir", required=True)
    p_ingest.add_argument("--epoch", default="2015-01-01", help="first week start (ISO date)")
    p_ingest.add_argument("--end", default="2020-01-08", help="last incident date (ISO)")

    p_grid = sub.add_parser("grid", help="run the full feature x lag grid")
    p_grid.add_argument("--config", required=True, help="run configuration file")
    p_grid.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_synth = sub.add_parser("synth", help="write a synthetic planted-lag dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--length", type=int, default=262)
    p_synth.add_argument("--alpha", type=float, default=0.8)
    p_synth.add_argument("--lag", type=int, default=2)
    p_synth.add_argument("--base", type=float, default=-30.0)
    p_synth.add_argument("--amplitude", type=float, default=0.0)
    p_synth.add_argument("--noise-std", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)

    p_report = sub.add_parser("report", help="re-render outputs from a stored grid report")
    p_report.add_argument("--report", required=True, help="path to gridreport.json")
    p_report.add_argument("--outdir", required=True)

    p_self = sub.add_parser("selftest", help="run the built-in oracle suites")
    p_self.add_argument("--quick", action="store_true", help="skip the planted-signal run")
    return parser


def _cmd_ingest(args) -> int:
    epoch = date.fromisoformat(args.epoch)
    end = date.fromisoformat(args.end)
    records = tio.parse_incidents(args.incidents)
    trends = tio.parse_trends(args.trends)
    target = aggregate_weekly(records, epoch, end, name=TARGET_NAME)
    for name, series in trends.items():
        if series.epoch != epoch:
            raise CliError(
                f"trends start {series.epoch.isoformat()} but epoch is {epoch.isoformat()}"
            )
        if len(series) != len(target):
            raise CliError(
                f"series {name!r} has {len(series)} weeks; incident range yields {len(target)}"
            )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    incidents_text = tio.render_incidents(records)
    trends_text = tio.render_trends(trends)
    (outdir / "incidents.csv").write_text(incidents_text, encoding="utf-8")
    (outdir / "trends.csv").write_text(trends_text, encoding="utf-8")
    manifest = [
        f"epoch = {epoch.isoformat()}",
        f"end = {end.isoformat()}",
        f"weeks = {len(target)}",
        f"incidents = {len(records)}",
        f"incidents_sha256 = {tio.sha256_hex(incidents_text.encode())}",
        f"trends_sha256 = {tio.sha256_hex(trends_text.encode())}",
        f"target = {TARGET_NAME}",
    ]
    manifest += [f"feature = {name}" for name in trends]
    (outdir / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    print(f"registered target {TARGET_NAME!r} ({len(target)} weeks) and {len(trends)} feature series:")
    for name in trends:
        print(f"  {name}")
    return 0


def _cmd_grid(args) -> int:
    cfg = tio.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if not cfg.incidents or not cfg.trends:
        raise CliError("config must set both 'incidents' and 'trends' paths")

    records = tio.parse_incidents(cfg.incidents)
    trends = tio.parse_trends(cfg.trends)
    target = scale_global_max(aggregate_weekly(records, cfg.epoch, cfg.end, name=TARGET_NAME))
    feature_ids = cfg.features or tuple(trends)
    missing = [f for f in feature_ids if f not in trends]
    if missing:
        raise CliError(f"config names unknown feature series: {missing}")
    bundle = DataBundle(target=target, features={k: trends[k] for k in feature_ids})
    plan = cfg.plan(TARGET_NAME, tuple(feature_ids))

    outdir = Path(cfg.outdir)
    logdir = outdir / "logs"
    logdir.mkdir(parents=True, exist_ok=True)

    def write_log(run_label, model):
        fname = run_label.replace("/", "__").replace(" ", "_") + ".log"
        (logdir / fname).write_text(render_training_log(model), encoding="utf-8")

    report = run_grid(bundle, plan, on_model=write_log)
    report.provenance["run_config"] = {"resolved": tio.render_config(cfg).splitlines()[1:]}
    paths = emit_grid(report, outdir)
    print(f"baseline scaled MAE: {report.baseline_mae:.2f}")
    sig = [c for c in report.cells if c.significant]
    print(f"{len(report.cells)} cells, {len(sig)} significant")
    for cell in sig:
        print(f"  feature={cell.feature_id} lag={cell.lag} mae={cell.mae_original:.2f} pi={cell.pi:+.2f}")
    print(f"report written to {paths['grid_csv'].parent}")
    if report.partial_failure:
        failed = [c for c in report.cells if c.error is not None]
        print(f"warning: {len(failed)} cell(s) failed; see provenance.txt", file=sys.stderr)
        return 2
    return 0


def _counts_to_incidents(values: np.ndarray, epoch: date) -> list[IncidentRecord]:
    """Expand weekly counts into dated incident rows (deterministic offsets)."""
    records = []
    for week, count in enumerate(values):
        start = week_start(epoch, week)
        for i in range(int(count)):
            records.append(IncidentRecord(date=start + timedelta(days=i % 7)))
    return records


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        length=args.length,
        alpha=args.alpha,
        lag=args.lag,
        base=args.base,
        seasonal_amplitude=args.amplitude,
        noise_std=args.noise_std,
        seed=args.seed,
    )
    target, planted, noise = generate_synthetic(spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    incidents = _counts_to_incidents(target.values, spec.epoch)
    if not incidents:
        raise CliError("synthetic target is all-zero; raise --base or --alpha")
    (outdir / "incidents.csv").write_text(tio.render_incidents(incidents), encoding="utf-8")
    (outdir / "trends.csv").write_text(
        tio.render_trends({PLANTED_NAME: planted, NOISE_NAME: noise}), encoding="utf-8"
    )
    end = week_start(spec.epoch, spec.length - 1) + timedelta(days=6)
    lines = [f"{k} = {v}" for k, v in vars(args).items() if k != "command"]
    lines += [f"epoch = {spec.epoch.isoformat()}", f"end = {end.isoformat()}"]
    (outdir / "synthspec.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"wrote synthetic dataset to {outdir} "
        f"(planted lag {spec.lag}, alpha {spec.alpha}, {spec.length} weeks, end {end.isoformat()})"
    )
    return 0


def _cmd_report(args) -> int:
    report = load_report(args.report)
    paths = emit_grid(report, args.outdir)
    print(f"re-rendered report into {paths['grid_csv'].parent}")
    return 0


def _cmd_selftest(args) -> int:
    from trendlag.selftest import run_selftest

    return run_selftest(quick=args.quick)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "ingest": _cmd_ingest,
        "grid": _cmd_grid,
        "synth": _cmd_synth,
        "report": _cmd_report,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except (CliError, ValueError, OSError) as exc:
        print(f"trendlag {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
