"""Pipeline configuration and staged, resumable, cache-aware execution.

Five stages run in order -- cluster, train, scenario, simulate, metrics --
each persisting its artifact under ``<output>/stages/<name>/`` together
with a fingerprint of everything that influenced it (input file hashes,
the relevant config subsection, upstream fingerprints). A stage is skipped
when its recorded fingerprint still matches, so re-runs after a config
change only redo the affected suffix of the chain.

Randomness is split into two domains: ``master_seed`` drives the Monte
Carlo planning streams (scenario stage and report sampling), while
``model_seed`` drives clustering and flow training, so changing the
planning seed never invalidates the trained models.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .clustering import relabel_by_mean_power, representative_profiles, sweep_select
from .errors import ConfigError, StageError
from .flow import ConditionalCouplingFlow, TrainConfig, load_flow
from .irradiance import IrradianceLibrary, read_irradiance_csv, segment_daily
from .powerflow import FeederNetwork, simulate_scenarios
from .profiles import read_profiles_csv
from .riskmetrics import DurationGrid, RiskSurface, VoltageLimits, sustained_stats
from .rng import RngStream
from .scenario import GrowthSchedule, ScenarioSet, build_scenario_set

CONFIG_SCHEMA_VERSION = 1
STAGE_ORDER = ("cluster", "train", "scenario", "simulate", "metrics")
DEFAULT_CASES = ((0.0, 20.0), (0.0, 100.0), (80.0, 0.0), (100.0, 0.0))


@dataclass
class PipelineConfig:
    profiles_csv: Path
    irradiance_csv: Path
    nodes_csv: Path
    branches_csv: Path
    output_dir: Path

    energy_steps: int = 21
    pv_steps: int = 21
    scenarios_per_cell: int = 1000
    delta_t_min: float = 15.0
    power_factor: float = 0.95
    energy_growth_factor: float = 2.0

    limits: VoltageLimits = field(default_factory=VoltageLimits)
    durations_min: tuple[float, ...] = (15.0, 30.0, 60.0, 120.0, 240.0, 360.0, 720.0, 1440.0)
    risk_levels: tuple[float, ...] = (0.0, 5.0, 10.0)

    k_min: int = 2
    k_max: int = 12
    algorithms: tuple[str, ...] = ("kmeans", "gmm", "agglomerative")
    normalize_profiles: bool = False

    n_layers: int = 6
    hidden_units: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)

    base_kv: float = 10.0
    base_mva: float = 1.0
    slack_voltage_pu: float = 1.0

    cases: tuple[tuple[float, float], ...] = DEFAULT_CASES
    master_seed: int = 42
    model_seed: int = 1234
    workers: int = 1

    def validate(self) -> None:
        for name in ("profiles_csv", "irradiance_csv", "nodes_csv", "branches_csv"):
            p = getattr(self, name)
            if not Path(p).is_file():
                raise ConfigError(f"{name.replace('_csv', '')} file not found: {p}")
        if self.energy_steps < 2 or self.pv_steps < 2:
            raise ConfigError("grid dimensions must be >= 2")
        if self.scenarios_per_cell < 1:
            raise ConfigError("scenarios_per_cell must be >= 1")
        if not 0.0 < self.power_factor <= 1.0:
            raise ConfigError("power_factor must be in (0, 1]")
        if any(not 0.0 <= r < 50.0 for r in self.risk_levels):
            raise ConfigError("risk levels must lie in [0, 50)")
        if self.k_min < 2 or self.k_max < self.k_min:
            raise ConfigError("clustering k range must satisfy 2 <= k_min <= k_max")
        if self.energy_growth_factor < 1.0:
            raise ConfigError("energy_growth_factor must be >= 1 (monotone growth)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            DurationGrid(self.delta_t_min, self.durations_min)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- YAML loading --------------------------------------------------------

    @classmethod
    def from_yaml(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        version = raw.get("schema_version")
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"{path}: unsupported schema_version {version!r}")

        base = path.parent

        def _path(section, key):
            try:
                return (base / raw[section][key]).resolve()
            except KeyError as exc:
                raise ConfigError(f"{path}: missing paths.{key}") from exc

        limits_raw = raw.get("limits", {})
        flow_raw = dict(raw.get("flow", {}))
        clustering_raw = raw.get("clustering", {})
        network_raw = raw.get("network", {})
        grid_raw = raw.get("grid", {})
        try:
            train = TrainConfig(**{k: flow_raw[k] for k in flow_raw
                                   if k not in ("n_layers", "hidden_units")})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid flow section: {exc}") from exc

        cfg = cls(
            profiles_csv=_path("paths", "profiles"),
            irradiance_csv=_path("paths", "irradiance"),
            nodes_csv=_path("paths", "nodes"),
            branches_csv=_path("paths", "branches"),
            output_dir=(base / raw["paths"].get("output", "out")).resolve(),
            energy_steps=int(grid_raw.get("energy_steps", 21)),
            pv_steps=int(grid_raw.get("pv_steps", 21)),
            scenarios_per_cell=int(raw.get("scenarios_per_cell", 1000)),
            delta_t_min=float(raw.get("delta_t_min", 15.0)),
            power_factor=float(raw.get("power_factor", 0.95)),
            energy_growth_factor=float(raw.get("energy_growth_factor", 2.0)),
            limits=VoltageLimits(
                v_max=float(limits_raw.get("v_max", 1.05)),
                v_caution=float(limits_raw.get("v_caution", 1.047)),
                v_min=float(limits_raw.get("v_min", 0.94)),
            ),
            durations_min=tuple(float(t) for t in raw.get(
                "durations_min", (15, 30, 60, 120, 240, 360, 720, 1440))),
            risk_levels=tuple(float(r) for r in raw.get("risk_levels", (0, 5, 10))),
            k_min=int(clustering_raw.get("k_min", 2)),
            k_max=int(clustering_raw.get("k_max", 12)),
            algorithms=tuple(clustering_raw.get("algorithms",
                                                ("kmeans", "gmm", "agglomerative"))),
            normalize_profiles=bool(clustering_raw.get("normalize", False)),
            n_layers=int(flow_raw.get("n_layers", 6)),
            hidden_units=int(flow_raw.get("hidden_units", 64)),
            train=train,
            base_kv=float(network_raw.get("base_kv", 10.0)),
            base_mva=float(network_raw.get("base_mva", 1.0)),
            slack_voltage_pu=float(network_raw.get("slack_voltage_pu", 1.0)),
            cases=tuple((float(e), float(p)) for e, p in raw.get("cases", DEFAULT_CASES)),
            master_seed=int(raw.get("master_seed", 42)),
            model_seed=int(raw.get("model_seed", 1234)),
            workers=int(raw.get("workers", 1)),
        )
        for key, value in (overrides or {}).items():
            setattr(cfg, key, value)
        cfg.validate()
        return cfg

    # -- canonical sections for fingerprinting -------------------------------

    def section(self, stage: str) -> dict:
        if stage == "cluster":
            return {
                "delta_t": self.delta_t_min,
                "k_min": self.k_min,
                "k_max": self.k_max,
                "algorithms": list(self.algorithms),
                "normalize": self.normalize_profiles,
                "model_seed": self.model_seed,
            }
        if stage == "train":
            return {
                "n_layers": self.n_layers,
                "hidden_units": self.hidden_units,
                "train": self.train.estimator_kwargs(),
                "model_seed": self.model_seed,
            }
        if stage == "scenario":
            return {
                "energy_steps": self.energy_steps,
                "pv_steps": self.pv_steps,
                "scenarios_per_cell": self.scenarios_per_cell,
                "power_factor": self.power_factor,
                "energy_growth_factor": self.energy_growth_factor,
                "delta_t": self.delta_t_min,
                "master_seed": self.master_seed,
            }
        if stage == "simulate":
            return {
                "base_kv": self.base_kv,
                "base_mva": self.base_mva,
                "slack_voltage_pu": self.slack_voltage_pu,
            }
        if stage == "metrics":
            return {
                "durations_min": list(self.durations_min),
                "limits": [self.limits.v_max, self.limits.v_caution, self.limits.v_min],
            }
        raise ValueError(f"unknown stage '{stage}'")


# -- hashing helpers ----------------------------------------------------------

def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- per-process worker state --------------------------------------------------

_WORKER_CACHE: dict = {}


def _load_models(train_dir: Path) -> dict[int, ConditionalCouplingFlow]:
    key = ("models", str(train_dir))
    if key not in _WORKER_CACHE:
        models = {}
        for p in sorted(train_dir.glob("model_cluster*.npz")):
            m = load_flow(p)
            models[int(m.cluster_id)] = m
        _WORKER_CACHE[key] = models
    return _WORKER_CACHE[key]


def _load_library(irr_csv: Path, delta_t: float) -> IrradianceLibrary:
    key = ("library", str(irr_csv), delta_t)
    if key not in _WORKER_CACHE:
        stamps, values = read_irradiance_csv(irr_csv)
        _WORKER_CACHE[key], _ = segment_daily(stamps, values, delta_t)
    return _WORKER_CACHE[key]


def _load_network(nodes_csv: Path, branches_csv: Path, base_kv: float, base_mva: float,
                  slack_pu: float) -> FeederNetwork:
    key = ("network", str(nodes_csv), str(branches_csv), base_kv, base_mva, slack_pu)
    if key not in _WORKER_CACHE:
        _WORKER_CACHE[key] = FeederNetwork.from_csvs(
            nodes_csv, branches_csv, base_kv=base_kv, base_mva=base_mva,
            slack_voltage_pu=slack_pu)
    return _WORKER_CACHE[key]


def _make_schedule(net: FeederNetwork, cfg_dict: dict) -> GrowthSchedule:
    cluster_base: dict[int, float] = {}
    for n in net.load_nodes():
        cluster_base[n.cluster] = cluster_base.get(n.cluster, 0.0) + n.base_load_gwh
    factor = cfg_dict["energy_growth_factor"]
    return GrowthSchedule(
        energy_steps=cfg_dict["energy_steps"] - 1,
        pv_steps=cfg_dict["pv_steps"] - 1,
        cluster_energy_bounds={k: (v, v * factor) for k, v in cluster_base.items()},
        node_pv_bounds={n.id: (n.pv_kwp_min, n.pv_kwp_max) for n in net.pv_nodes()},
    )


def _cell_name(cell: tuple[int, int]) -> str:
    return f"cell_{cell[0]:03d}_{cell[1]:03d}"


def _scenario_cell_worker(args) -> None:
    cell, ctx = args
    models = _load_models(Path(ctx["train_dir"]))
    library = _load_library(Path(ctx["irradiance_csv"]), ctx["delta_t"])
    net = _load_network(Path(ctx["nodes_csv"]), Path(ctx["branches_csv"]),
                        ctx["base_kv"], ctx["base_mva"], ctx["slack_voltage_pu"])
    schedule = _make_schedule(net, ctx)
    stream = RngStream(ctx["master_seed"]).child("scenario")
    ss = build_scenario_set(cell, ctx["scenarios_per_cell"], models, library, net,
                            schedule, ctx["power_factor"], stream)
    ss.save(Path(ctx["out_dir"]) / f"{_cell_name(cell)}.npz")


def _simulate_cell_worker(args) -> None:
    cell, ctx = args
    net = _load_network(Path(ctx["nodes_csv"]), Path(ctx["branches_csv"]),
                        ctx["base_kv"], ctx["base_mva"], ctx["slack_voltage_pu"])
    ss = ScenarioSet.load(Path(ctx["scenario_dir"]) / f"{_cell_name(cell)}.npz")
    index = net.node_index()
    S, _, T = ss.p.shape
    p = np.zeros((S, len(net.nodes), T))
    q = np.zeros((S, len(net.nodes), T))
    for b, nid in enumerate(ss.node_ids):
        p[:, index[nid], :] = ss.p[:, b, :]
        q[:, index[nid], :] = ss.q[:, b, :]
    result = simulate_scenarios(net, p, q)
    out = Path(ctx["out_dir"]) / f"volt_{_cell_name(cell)}.npz"
    np.savez(out, v=result.v.astype(np.float32),
             snapshot_converged=result.snapshot_converged,
             node_ids=np.array(result.node_ids))


def _map_cells(cells, worker, ctx: dict, workers: int) -> None:
    args = [(cell, ctx) for cell in cells]
    if workers <= 1:
        for a in args:
            worker(a)
    else:
        chunk = max(1, len(args) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            list(ex.map(worker, args, chunksize=chunk))


# -- the pipeline --------------------------------------------------------------

class Pipeline:
    """Executes the staged experiment with fingerprint-based caching."""

    def __init__(self, cfg: PipelineConfig):
        cfg.validate()
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.stages_root = self.out / "stages"
        self._fingerprints: dict[str, str] = {}

    def stage_dir(self, stage: str) -> Path:
        return self.stages_root / stage

    # -- fingerprints ---------------------------------------------------------

    def fingerprint(self, stage: str) -> str:
        if stage in self._fingerprints:
            return self._fingerprints[stage]
        cfg = self.cfg
        parts: list[str] = [f"stage:{stage}", _canon(cfg.section(stage))]
        if stage == "cluster":
            parts.append(_sha256_file(cfg.profiles_csv))
        elif stage == "train":
            parts.append(self.fingerprint("cluster"))
        elif stage == "scenario":
            parts.append(self.fingerprint("train"))
            parts.append(_sha256_file(cfg.irradiance_csv))
            parts.append(_sha256_file(cfg.nodes_csv))
            parts.append(_sha256_file(cfg.branches_csv))
        elif stage == "simulate":
            parts.append(self.fingerprint("scenario"))
        elif stage == "metrics":
            parts.append(self.fingerprint("simulate"))
        fp = _sha256_bytes("\n".join(parts).encode())
        self._fingerprints[stage] = fp
        return fp

    def _stage_meta_path(self, stage: str) -> Path:
        return self.stage_dir(stage) / "stage.json"

    def stage_is_current(self, stage: str) -> bool:
        meta_path = self._stage_meta_path(stage)
        if not meta_path.is_file():
            return False
        try:
            meta = json.loads(meta_path.read_text())
        except (OSError, json.JSONDecodeError):
            return False
        return meta.get("fingerprint") == self.fingerprint(stage)

    # -- execution --------------------------------------------------------------

    def run(self, resume: bool = False, through: str | None = None) -> dict:
        """Run stages in order (optionally stopping after ``through``).

        Stages whose fingerprint matches their recorded one are skipped and
        marked cached. The manifest is (re)written once the metrics stage
        is reached.
        """
        if through is not None and through not in STAGE_ORDER:
            raise ConfigError(f"unknown stage '{through}'")
        last = STAGE_ORDER.index(through) if through else len(STAGE_ORDER) - 1
        self.out.mkdir(parents=True, exist_ok=True)
        self.stages_root.mkdir(parents=True, exist_ok=True)
        stage_records = []
        for stage in STAGE_ORDER[:last + 1]:
            sdir = self.stage_dir(stage)
            fp = self.fingerprint(stage)
            if self.stage_is_current(stage):
                meta = json.loads(self._stage_meta_path(stage).read_text())
                meta["cached"] = True
                stage_records.append(meta)
                continue
            if sdir.exists() and any(sdir.iterdir()) and not self._stage_meta_path(stage).is_file() \
                    and not resume:
                raise StageError(stage, f"{sdir} holds partial output from an interrupted run; "
                                        "pass --resume to rebuild it or clean the directory")
            if sdir.exists():
                shutil.rmtree(sdir)
            sdir.mkdir(parents=True)
            runner = getattr(self, f"_run_{stage}")
            try:
                counts = runner(sdir)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(stage, str(exc)) from exc
            meta = {
                "name": stage,
                "fingerprint": fp,
                "outputs": sorted(p.name for p in sdir.iterdir() if p.name != "stage.json"),
                "counts": counts,
                "cached": False,
            }
            self._stage_meta_path(stage).write_text(json.dumps(meta, sort_keys=True, indent=1))
            stage_records.append(meta)

        if STAGE_ORDER[last] != "metrics":
            return {"stages": stage_records}
        manifest = self._build_manifest(stage_records)
        (self.out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
        return manifest

    def _build_manifest(self, stage_records: list[dict]) -> dict:
        cfg = self.cfg
        cells = cfg.energy_steps * cfg.pv_steps
        metrics_meta = stage_records[-1]["counts"]
        return {
            "schema": 1,
            "package": "hostcap 0.1.0",
            "master_seed": cfg.master_seed,
            "model_seed": cfg.model_seed,
            "grid": {"energy_steps": cfg.energy_steps, "pv_steps": cfg.pv_steps},
            "scenarios_per_cell": cfg.scenarios_per_cell,
            "counts": {
                "cells": cells,
                "snapshots_total": metrics_meta.get("snapshots_total", 0),
                "excluded_scenarios": metrics_meta.get("excluded_scenarios", 0),
            },
            "stages": [
                {"name": m["name"], "fingerprint": m["fingerprint"], "cached": m["cached"],
                 "counts": m["counts"]}
                for m in stage_records
            ],
        }

    # -- stage runners ------------------------------------------------------------

    def _cells(self) -> list[tuple[int, int]]:
        return [(ie, ip) for ie in range(self.cfg.energy_steps)
                for ip in range(self.cfg.pv_steps)]

    def _run_cluster(self, sdir: Path) -> dict:
        cfg = self.cfg
        data = read_profiles_csv(cfg.profiles_csv, cfg.delta_t_min)
        rep = representative_profiles(data)
        result = sweep_select(rep.matrix, range(cfg.k_min, cfg.k_max + 1), cfg.algorithms,
                              RngStream(cfg.model_seed), normalize=cfg.normalize_profiles)
        best = relabel_by_mean_power(result.best, rep.matrix)

        np.savez(sdir / "representative.npz", matrix=rep.matrix,
                 transformer_ids=np.array(rep.transformer_ids))
        _write_csv(sdir / "assignment.csv", ["transformer_id", "cluster"],
                   [[tid, str(c)] for tid, c in zip(rep.transformer_ids, best.labels)])
        _write_csv(
            sdir / "clustering_report.csv",
            ["algorithm", "k", "si", "chi", "dbi", "di", "mdi", "cluster_sizes"],
            [[r.algorithm, str(r.k), repr(r.scores.si), repr(r.scores.chi), repr(r.scores.dbi),
              repr(r.scores.di), repr(r.scores.mdi), "|".join(str(s) for s in r.cluster_sizes)]
             for r in result.table],
        )
        summary = {
            "algorithm": result.best_algorithm,
            "k": result.best_k,
            "low_confidence": result.low_confidence,
            "per_algorithm_best_k": result.per_algorithm_best_k,
        }
        (sdir / "selection.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
        return {"transformers": data.n_transformers, "selected_k": result.best_k,
                "selected_algorithm": result.best_algorithm}

    def _read_assignment(self) -> dict[str, int]:
        path = self.stage_dir("cluster") / "assignment.csv"
        out = {}
        import csv as _csv
        with path.open(newline="") as fh:
            for row in _csv.DictReader(fh):
                out[row["transformer_id"]] = int(row["cluster"])
        return out

    def _run_train(self, sdir: Path) -> dict:
        cfg = self.cfg
        data = read_profiles_csv(cfg.profiles_csv, cfg.delta_t_min)
        assignment = self._read_assignment()
        labels = [assignment[tid] for tid in data.transformer_ids]
        counts = {}
        for cluster in sorted(set(labels)):
            members = [m for m, c in enumerate(labels) if c == cluster]
            P, w = data.training_pairs(members)
            model = ConditionalCouplingFlow(
                n_layers=cfg.n_layers, hidden_units=cfg.hidden_units,
                random_state=RngStream(cfg.model_seed).child("train", cluster),
                cluster_id=cluster, **cfg.train.estimator_kwargs(),
            ).fit(P, w)
            model.save(sdir / f"model_cluster{cluster}.npz")
            counts[f"cluster_{cluster}"] = {
                "pairs": int(P.shape[0]),
                "best_val_nll": model.best_val_nll_,
                "best_epoch": model.best_epoch_,
            }
        return counts

    def _ctx(self, extra: dict) -> dict:
        cfg = self.cfg
        ctx = {
            "train_dir": str(self.stage_dir("train")),
            "scenario_dir": str(self.stage_dir("scenario")),
            "irradiance_csv": str(cfg.irradiance_csv),
            "nodes_csv": str(cfg.nodes_csv),
            "branches_csv": str(cfg.branches_csv),
            "delta_t": cfg.delta_t_min,
            "base_kv": cfg.base_kv,
            "base_mva": cfg.base_mva,
            "slack_voltage_pu": cfg.slack_voltage_pu,
            "energy_steps": cfg.energy_steps,
            "pv_steps": cfg.pv_steps,
            "scenarios_per_cell": cfg.scenarios_per_cell,
            "power_factor": cfg.power_factor,
            "energy_growth_factor": cfg.energy_growth_factor,
            "master_seed": cfg.master_seed,
        }
        ctx.update(extra)
        return ctx

    def _run_scenario(self, sdir: Path) -> dict:
        ctx = self._ctx({"out_dir": str(sdir)})
        _map_cells(self._cells(), _scenario_cell_worker, ctx, self.cfg.workers)
        return {"cells": len(self._cells()),
                "scenarios_per_cell": self.cfg.scenarios_per_cell}

    def _run_simulate(self, sdir: Path) -> dict:
        ctx = self._ctx({"out_dir": str(sdir)})
        _map_cells(self._cells(), _simulate_cell_worker, ctx, self.cfg.workers)
        return {"cells": len(self._cells())}

    def _run_metrics(self, sdir: Path) -> dict:
        cfg = self.cfg
        grid = DurationGrid(cfg.delta_t_min, cfg.durations_min)
        sim_dir = self.stage_dir("simulate")
        E, P, S = cfg.energy_steps, cfg.pv_steps, cfg.scenarios_per_cell

        first = np.load(sim_dir / f"volt_{_cell_name((0, 0))}.npz")
        node_ids = [str(x) for x in first["node_ids"]]
        T = first["v"].shape[2]
        first.close()
        taus = grid.for_horizon(T)
        net = _load_network(cfg.nodes_csv, cfg.branches_csv, cfg.base_kv, cfg.base_mva,
                            cfg.slack_voltage_pu)
        slack_id = net.slack().id
        keep = np.array([nid != slack_id for nid in node_ids])

        stat_over = np.full((E, P, len(taus), S), np.nan)
        stat_under = np.full((E, P, len(taus), S), np.nan)
        n_excluded = np.zeros((E, P), dtype=int)
        snapshots = 0
        for ie in range(E):
            for ip in range(P):
                with np.load(sim_dir / f"volt_{_cell_name((ie, ip))}.npz") as data:
                    v = data["v"].astype(float)[:, keep, :]
                    conv = data["snapshot_converged"].all(axis=1)
                snapshots += v.shape[0] * v.shape[2]
                n_excluded[ie, ip] = int((~conv).sum())
                kept = v[conv]
                for it, tau in enumerate(taus):
                    over, under = sustained_stats(kept, tau, cfg.delta_t_min)
                    stat_over[ie, ip, it, :over.size] = over
                    stat_under[ie, ip, it, :under.size] = under

        energy_levels = np.linspace(0.0, 100.0, E)
        pv_levels = np.linspace(0.0, 100.0, P)
        surface = RiskSurface(
            energy_levels_percent=energy_levels, pv_levels_percent=pv_levels,
            durations_min=taus, stat_over=stat_over, stat_under=stat_under,
            n_excluded=n_excluded, limits=cfg.limits,
        )
        surface.save(sdir / "surface.npz")
        return {
            "snapshots_total": snapshots,
            "excluded_scenarios": int(n_excluded.sum()),
            "durations": list(taus),
        }


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    import csv as _csv
    with Path(path).open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def run_pipeline(cfg: PipelineConfig, resume: bool = False) -> dict:
    """Execute all stages; returns the run manifest."""
    return Pipeline(cfg).run(resume=resume)
