"""Report bundle: plain-CSV planning products derived from the stage artifacts.

Everything here is a deterministic reduction of persisted artifacts, so
two runs with the same seed produce byte-identical bundles. Floats are
written with ``repr`` (shortest round-trip form), which the CSV
round-trip property relies on.
"""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path

import numpy as np

from .errors import StageError
from .pipeline import STAGE_ORDER, Pipeline, PipelineConfig, _load_models
from .profiles import read_profiles_csv
from .riskmetrics import RiskSurface
from .rng import RngStream
from .stats import percentile

CASE_ENVELOPE_PERCENTILES = (5.0, 50.0, 95.0)
FIDELITY_SAMPLES = 200


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _nearest_index(levels: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(levels - value)))


def generate_report(cfg: PipelineConfig) -> Path:
    """Emit the report bundle under ``<output>/report``; returns the directory."""
    pipe = Pipeline(cfg)
    for stage in STAGE_ORDER:
        if not pipe.stage_is_current(stage):
            raise StageError("report", f"missing stage output: {stage} (run the pipeline first)")

    report_dir = Path(cfg.output_dir) / "report"
    if report_dir.exists():
        shutil.rmtree(report_dir)
    report_dir.mkdir(parents=True)

    cluster_dir = pipe.stage_dir("cluster")
    shutil.copyfile(cluster_dir / "clustering_report.csv", report_dir / "clustering_report.csv")
    shutil.copyfile(cluster_dir / "assignment.csv", report_dir / "assignment.csv")

    _emit_fidelity(cfg, pipe, report_dir)

    surface = RiskSurface.load(pipe.stage_dir("metrics") / "surface.npz")
    _emit_extreme_heatmap(surface, report_dir)
    _emit_region_grid(cfg, surface, report_dir)
    _emit_risk_surface(cfg, surface, report_dir)
    _emit_hc_table(cfg, surface, report_dir)
    _emit_cases(cfg, surface, report_dir)
    return report_dir


def _emit_fidelity(cfg: PipelineConfig, pipe: Pipeline, report_dir: Path) -> None:
    """Original-vs-sampled percentile envelopes per cluster."""
    data = read_profiles_csv(cfg.profiles_csv, cfg.delta_t_min)
    with (pipe.stage_dir("cluster") / "assignment.csv").open(newline="") as fh:
        assignment = {row["transformer_id"]: int(row["cluster"]) for row in csv.DictReader(fh)}
    models = _load_models(pipe.stage_dir("train"))
    labels = [assignment[tid] for tid in data.transformer_ids]
    for cluster in sorted(models):
        members = [m for m, c in enumerate(labels) if c == cluster]
        P, w = data.training_pairs(members)
        sampled = models[cluster].sample(
            float(np.median(w)), FIDELITY_SAMPLES,
            RngStream(cfg.master_seed).child("report", "fidelity", cluster))
        rows = []
        for t in range(P.shape[1]):
            row = [str(t + 1)]
            row += [_fmt(percentile(P[:, t], q)) for q in CASE_ENVELOPE_PERCENTILES]
            row += [_fmt(percentile(sampled[:, t], q)) for q in CASE_ENVELOPE_PERCENTILES]
            rows.append(row)
        _write_csv(report_dir / f"fidelity_cluster{cluster}.csv",
                   ["t", "orig_p5", "orig_p50", "orig_p95", "samp_p5", "samp_p50", "samp_p95"],
                   rows)


def _emit_extreme_heatmap(surface: RiskSurface, report_dir: Path) -> None:
    tau0 = surface.durations_min[0]
    rows = []
    for ie, e in enumerate(surface.energy_levels_percent):
        for ip, p in enumerate(surface.pv_levels_percent):
            rows.append([
                _fmt(e), _fmt(p),
                _fmt(surface.intensity(ie, ip, tau0, 100.0, "over")),
                _fmt(surface.intensity(ie, ip, tau0, 0.0, "under")),
            ])
    _write_csv(report_dir / "extreme_heatmap.csv",
               ["energy_step", "pv_step", "v_max_p100", "v_min_p0"], rows)


def _emit_region_grid(cfg: PipelineConfig, surface: RiskSurface, report_dir: Path) -> None:
    rows = []
    for r in cfg.risk_levels:
        for tau in surface.durations_min:
            for ie, e in enumerate(surface.energy_levels_percent):
                for ip, p in enumerate(surface.pv_levels_percent):
                    rows.append([_fmt(r), _fmt(tau), _fmt(e), _fmt(p),
                                 surface.region(ie, ip, r, tau)])
    _write_csv(report_dir / "region_grid.csv",
               ["risk", "tau_min", "energy_step", "pv_step", "region"], rows)


def _emit_risk_surface(cfg: PipelineConfig, surface: RiskSurface, report_dir: Path) -> None:
    rows = []
    for ie, e in enumerate(surface.energy_levels_percent):
        for ip, p in enumerate(surface.pv_levels_percent):
            for tau in surface.durations_min:
                over_vals = surface.stat_values(ie, ip, tau, "over")
                under_vals = surface.stat_values(ie, ip, tau, "under")
                for r in cfg.risk_levels:
                    region = surface.region(ie, ip, r, tau)
                    rows.append([
                        _fmt(e), _fmt(p), _fmt(tau), _fmt(100.0 - r),
                        _fmt(over_vals.mean()),
                        _fmt(surface.frequency(ie, ip, tau, "over")),
                        _fmt(surface.intensity(ie, ip, tau, 100.0 - r, "over")),
                        region,
                    ])
                    rows.append([
                        _fmt(e), _fmt(p), _fmt(tau), _fmt(r),
                        _fmt(under_vals.mean()),
                        _fmt(surface.frequency(ie, ip, tau, "under")),
                        _fmt(surface.intensity(ie, ip, tau, r, "under")),
                        region,
                    ])
    _write_csv(report_dir / "risk_surface.csv",
               ["energy_step", "pv_step", "tau_min", "q", "phi_stat", "frequency",
                "intensity", "region"], rows)


def _emit_hc_table(cfg: PipelineConfig, surface: RiskSurface, report_dir: Path) -> None:
    rows = []
    flagged = []
    for ie, e in enumerate(surface.energy_levels_percent):
        for r in cfg.risk_levels:
            for tau in surface.durations_min:
                hc = surface.hosting_capacity(ie, r, tau)
                if hc.non_monotone:
                    flagged.append((float(e), r, tau))
                rows.append([_fmt(e), _fmt(r), _fmt(tau), _fmt(hc.value_or_zero)])
    _write_csv(report_dir / "hc_table.csv",
               ["energy_step", "risk", "tau_min", "hc_percent"], rows)
    if flagged:
        (report_dir / "hc_flags.json").write_text(json.dumps(
            {"non_monotone_surface": [list(f) for f in flagged]}, sort_keys=True, indent=1))


def _emit_cases(cfg: PipelineConfig, surface: RiskSurface, report_dir: Path) -> None:
    """Per selected operating point: IDF summary plus raw statistic values."""
    idf_rows = []
    phi_rows = []
    tau0 = surface.durations_min[0]
    for i, (e_pct, pv_pct) in enumerate(cfg.cases):
        case = chr(ord("A") + i)
        ie = _nearest_index(surface.energy_levels_percent, e_pct)
        ip = _nearest_index(surface.pv_levels_percent, pv_pct)
        for direction in ("over", "under"):
            for r in cfg.risk_levels:
                q = 100.0 - r if direction == "over" else r
                dur = surface.representative_duration(ie, ip, q, direction)
                idf_rows.append([
                    case, _fmt(surface.energy_levels_percent[ie]),
                    _fmt(surface.pv_levels_percent[ip]), direction, _fmt(r),
                    _fmt(100.0 * surface.frequency(ie, ip, tau0, direction)),
                    _fmt(surface.intensity(ie, ip, tau0, q, direction)),
                    "" if dur is None else _fmt(dur / 60.0),
                ])
            for tau in surface.durations_min:
                for s, val in enumerate(surface.stat_values(ie, ip, tau, direction)):
                    phi_rows.append([case, direction, _fmt(tau), str(s), _fmt(val)])
    _write_csv(report_dir / "idf_case.csv",
               ["case", "energy_pct", "pv_pct", "direction", "risk", "frequency_pct",
                "intensity_pu", "duration_h"], idf_rows)
    _write_csv(report_dir / "phi_values.csv",
               ["case", "direction", "tau_min", "scenario", "phi"], phi_rows)
