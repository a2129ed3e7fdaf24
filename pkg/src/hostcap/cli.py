"""Command-line pipeline: cluster, train, sample, scenario, simulate, metrics, hc, report, run."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .datasets import write_demo_dataset
from .errors import ConfigError, StageError
from .flow import load_flow
from .pipeline import Pipeline, PipelineConfig
from .reports import generate_report
from .riskmetrics import RiskSurface
from .rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2


class _Parser(argparse.ArgumentParser):
    # map usage problems onto the config-error exit code
    def error(self, message):
        raise ConfigError(message)


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", required=True, help="pipeline config YAML")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--workers", type=int, default=None, help="override worker count")
    p.add_argument("--resume", action="store_true",
                   help="rebuild stages left incomplete by an interrupted run")


def _load_config(args) -> PipelineConfig:
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "scenarios", None) is not None:
        overrides["scenarios_per_cell"] = args.scenarios
    if getattr(args, "grid", None) is not None:
        try:
            e, p = (int(x) for x in args.grid.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"--grid expects ExP (e.g. 21x21), got '{args.grid}'") from exc
        overrides["energy_steps"] = e
        overrides["pv_steps"] = p
    return PipelineConfig.from_yaml(args.config, overrides)


def build_parser() -> _Parser:
    parser = _Parser(prog="hostcap",
                     description="Risk-based PV hosting capacity analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for stage in ("cluster", "train", "scenario", "simulate", "metrics"):
        p = sub.add_parser(stage, help=f"run the pipeline through the {stage} stage")
        _add_common(p)
        if stage == "scenario":
            p.add_argument("--grid", help="override grid as ExP, e.g. 21x21")
            p.add_argument("--scenarios", type=int, help="override scenarios per cell")

    p = sub.add_parser("run", help="run all stages and emit the report bundle")
    _add_common(p)

    p = sub.add_parser("report", help="emit the report bundle from completed stages")
    _add_common(p)

    p = sub.add_parser("hc", help="print the hosting-capacity table from completed stages")
    _add_common(p)
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("sample", help="sample daily profiles from a trained flow model")
    p.add_argument("--model", required=True, help="model .npz written by the train stage")
    p.add_argument("--w", type=float, required=True, help="annual energy (GWh/yr)")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("fixture", help="materialize the synthetic demo dataset and config")
    p.add_argument("--out", required=True, help="target directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--scenarios", type=int, default=200)
    p.add_argument("--grid", default="21x21")
    return parser


def _cmd_stage(args, through: str) -> int:
    cfg = _load_config(args)
    result = Pipeline(cfg).run(resume=args.resume, through=through)
    stages = result["stages"] if "stages" in result else result.get("stages", [])
    for meta in stages:
        status = "cached" if meta.get("cached") else "built"
        print(f"{meta['name']}: {status}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    manifest = Pipeline(cfg).run(resume=args.resume)
    report_dir = generate_report(cfg)
    print(json.dumps(manifest["counts"], sort_keys=True))
    print(f"report bundle: {report_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg = _load_config(args)
    report_dir = generate_report(cfg)
    print(f"report bundle: {report_dir}")
    return EXIT_OK


def _cmd_hc(args) -> int:
    cfg = _load_config(args)
    pipe = Pipeline(cfg)
    pipe.run(resume=args.resume, through="metrics")
    surface = RiskSurface.load(pipe.stage_dir("metrics") / "surface.npz")
    rows = [["energy_step", "risk", "tau_min", "hc_percent"]]
    for ie, e in enumerate(surface.energy_levels_percent):
        for r in cfg.risk_levels:
            for tau in surface.durations_min:
                hc = surface.hosting_capacity(ie, r, tau)
                rows.append([repr(float(e)), repr(float(r)), repr(float(tau)),
                             repr(hc.value_or_zero)])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        for row in rows:
            print(",".join(row))
    return EXIT_OK


def _cmd_sample(args) -> int:
    model = load_flow(args.model)
    samples = model.sample(args.w, args.count, RngStream(args.seed).child("cli", "sample"))
    header = [f"t{i + 1}" for i in range(samples.shape[1])]
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in samples]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return EXIT_OK


def _cmd_fixture(args) -> int:
    out = Path(args.out)
    paths = write_demo_dataset(out, seed=args.seed, n_days=args.days)
    try:
        e, p = (int(x) for x in args.grid.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--grid expects ExP, got '{args.grid}'") from exc
    config = f"""schema_version: 1
paths:
  profiles: {paths['profiles'].name}
  irradiance: {paths['irradiance'].name}
  nodes: {paths['nodes'].name}
  branches: {paths['branches'].name}
  output: out
grid: {{energy_steps: {e}, pv_steps: {p}}}
scenarios_per_cell: {args.scenarios}
delta_t_min: 15
power_factor: 0.95
energy_growth_factor: 1.6
limits: {{v_max: 1.05, v_caution: 1.047, v_min: 0.94}}
durations_min: [15, 30, 60, 120, 240, 360, 720, 1440]
risk_levels: [0, 5, 10]
clustering: {{k_min: 2, k_max: 4, algorithms: [kmeans, gmm, agglomerative]}}
flow: {{n_layers: 6, hidden_units: 64, learning_rate: 0.001, batch_size: 64,
  max_epochs: 120, grad_clip: 5, val_fraction: 0.1, patience: 20}}
network: {{base_kv: 10, base_mva: 1.0, slack_voltage_pu: 1.0}}
cases: [[0, 20], [0, 100], [80, 0], [100, 0]]
master_seed: 42
model_seed: 1234
workers: 1
"""
    (out / "config.yaml").write_text(config)
    print(f"demo dataset written to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("cluster", "train", "scenario", "simulate", "metrics"):
            return _cmd_stage(args, args.command)
        handler = {
            "run": _cmd_run,
            "report": _cmd_report,
            "hc": _cmd_hc,
            "sample": _cmd_sample,
            "fixture": _cmd_fixture,
        }[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
