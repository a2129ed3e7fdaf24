"""Planning-grid growth schedules and Monte Carlo scenario construction.

A planning cell fixes one energy-growth step and one PV-growth step; a
scenario set holds S independent realizations of nodal load and PV power
time series for that cell, generated from the trained cluster flows plus
bootstrap irradiance days. All draws are addressed by (cell, node/purpose)
streams, so any generation order yields identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .irradiance import IrradianceLibrary, bootstrap_days, pv_power
from .powerflow import FeederNetwork
from .profiles import reactive_from_active
from .rng import RngStream


def linear_growth(l: float, n_steps: int) -> float:
    return l / n_steps


def _check_growth_function(gamma: Callable[[float, int], float], n_steps: int) -> None:
    if n_steps < 1:
        raise ValueError("number of planning steps must be >= 1")
    if abs(gamma(0, n_steps)) > 1e-12 or abs(gamma(n_steps, n_steps) - 1.0) > 1e-12:
        raise ValueError("growth function must map 0 -> 0 and n_steps -> 1")
    levels = [gamma(l, n_steps) for l in range(n_steps + 1)]
    if any(b < a - 1e-12 for a, b in zip(levels, levels[1:])):
        raise ValueError("growth function must be monotone non-decreasing")


@dataclass
class GrowthSchedule:
    """Interpolates cluster energies and nodal PV capacities over the horizon.

    The energy and PV axes are swept independently, each over its own
    number of planning steps (a step count of L yields L+1 levels, 0-100%).
    """

    energy_steps: int
    pv_steps: int
    cluster_energy_bounds: Mapping[int, tuple[float, float]]  # GWh/yr
    node_pv_bounds: Mapping[str, tuple[float, float]]         # kWp
    growth_function: Callable[[float, int], float] = linear_growth

    def __post_init__(self):
        _check_growth_function(self.growth_function, self.energy_steps)
        _check_growth_function(self.growth_function, self.pv_steps)
        for k, (lo, hi) in self.cluster_energy_bounds.items():
            if lo > hi:
                raise ValueError(f"cluster {k}: energy bounds out of order")
        for b, (lo, hi) in self.node_pv_bounds.items():
            if lo > hi:
                raise ValueError(f"node {b}: PV bounds out of order")

    def cluster_energy(self, cluster: int, l: float) -> float:
        lo, hi = self.cluster_energy_bounds[cluster]
        return growth_level(lo, hi, l, self.energy_steps, self.growth_function)

    def total_energy(self, l: float) -> float:
        return sum(self.cluster_energy(k, l) for k in self.cluster_energy_bounds)

    def pv_capacity(self, node: str, l: float) -> float:
        lo, hi = self.node_pv_bounds[node]
        return growth_level(lo, hi, l, self.pv_steps, self.growth_function)

    def total_pv_capacity(self, l: float) -> float:
        return sum(self.pv_capacity(b, l) for b in self.node_pv_bounds)


def growth_level(w_min: float, w_max: float, l: float, n_steps: int,
                 growth_function: Callable[[float, int], float] = linear_growth) -> float:
    """Interpolated level ``w_min + gamma(l) * (w_max - w_min)``."""
    if not 0 <= l <= n_steps:
        raise ValueError(f"planning step {l} outside [0, {n_steps}]")
    return w_min + growth_function(l, n_steps) * (w_max - w_min)


@dataclass
class NodalInjection:
    """Net nodal power for one scenario: load minus PV, with components."""

    node: str
    p_load: np.ndarray  # kW
    p_pv: np.ndarray    # kW
    power_factor: float

    @property
    def p(self) -> np.ndarray:
        return self.p_load - self.p_pv

    @property
    def q(self) -> np.ndarray:
        return reactive_from_active(self.p_load, self.power_factor)


@dataclass
class ScenarioSet:
    """S Monte Carlo realizations of nodal injections for one planning cell."""

    cell: tuple[int, int]  # (energy step, pv step)
    node_ids: list[str]
    p_load: np.ndarray  # (S, B, T) kW
    p_pv: np.ndarray    # (S, B, T) kW
    power_factor: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_load.shape != self.p_pv.shape or self.p_load.ndim != 3:
            raise ValueError("p_load and p_pv must share shape (S, B, T)")
        if self.p_load.shape[1] != len(self.node_ids):
            raise ValueError("one node id per injection row required")

    @property
    def n_scenarios(self) -> int:
        return self.p_load.shape[0]

    @property
    def p(self) -> np.ndarray:
        return self.p_load - self.p_pv

    @property
    def q(self) -> np.ndarray:
        return reactive_from_active(self.p_load, self.power_factor)

    def injection(self, scenario: int, node: str) -> NodalInjection:
        b = self.node_ids.index(node)
        return NodalInjection(node=node, p_load=self.p_load[scenario, b],
                              p_pv=self.p_pv[scenario, b], power_factor=self.power_factor)

    # -- persistence: binary tensors plus a JSON sidecar ---------------------

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix != ".npz":
            path = path.with_suffix(".npz")
        load32 = self.p_load.astype(np.float32)
        pv32 = self.p_pv.astype(np.float32)
        np.savez(path, p_load=load32, p_pv=pv32, p_net=load32 - pv32)
        sidecar = {
            "cell": list(self.cell),
            "node_ids": self.node_ids,
            "shape": list(self.p_load.shape),
            "power_factor": self.power_factor,
            "provenance": self.provenance,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))

    @classmethod
    def load(cls, path) -> "ScenarioSet":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        with np.load(path) as data:
            p_load = data["p_load"]
            p_pv = data["p_pv"]
            p_net = data["p_net"]
        # net-injection identity must survive the round trip
        if not np.array_equal(p_net, p_load - p_pv):
            raise ValueError(f"{path}: stored components violate the net-injection identity")
        return cls(cell=tuple(sidecar["cell"]), node_ids=sidecar["node_ids"],
                   p_load=p_load.astype(float), p_pv=p_pv.astype(float),
                   power_factor=sidecar["power_factor"], provenance=sidecar["provenance"])


def node_energy_shares(net: FeederNetwork) -> dict[str, tuple[int, float]]:
    """Per load node: (cluster, share of the cluster's base-year energy)."""
    totals: dict[int, float] = {}
    for n in net.load_nodes():
        if n.cluster is None:
            raise ValueError(f"load node {n.id} has no cluster assigned")
        totals[n.cluster] = totals.get(n.cluster, 0.0) + n.base_load_gwh
    shares = {}
    for n in net.load_nodes():
        total = totals[n.cluster]
        if total <= 0:
            raise ValueError(f"cluster {n.cluster}: total base-year energy must be positive")
        shares[n.id] = (n.cluster, n.base_load_gwh / total)
    return shares


def build_scenario_set(cell: tuple[int, int], n_scenarios: int, models: Mapping[int, object],
                       library: IrradianceLibrary, net: FeederNetwork,
                       schedule: GrowthSchedule, power_factor: float,
                       stream: RngStream) -> ScenarioSet:
    """Generate the Monte Carlo injection set for one planning cell.

    One irradiance day per scenario is shared feeder-wide (full spatial
    correlation across a single MV feeder). Each load node samples its
    cluster's flow conditioned on its proportional share of the cluster
    energy at the cell's energy step.

    Stream addressing uses common random numbers across the grid: the
    scenario-s irradiance day is the same in every cell, and load draws
    depend only on the energy step, so sweeping the PV axis varies nothing
    but installed capacity. Cells can still be built independently in any
    order; every draw derives purely from (master seed, path).
    """
    l_energy, l_pv = cell
    shares = node_energy_shares(net)
    missing = sorted({c for c, _ in shares.values()} - set(models.keys()))
    if missing:
        nodes = [nid for nid, (c, _) in shares.items() if c in missing]
        raise ValueError(
            f"no trained model for cluster(s) {missing}; affected nodes: {', '.join(nodes)}"
        )

    load_ids = [n.id for n in net.load_nodes()]
    pv_ids = [n.id for n in net.pv_nodes()]
    covered = sorted(set(load_ids) | set(pv_ids))
    T = library.days.shape[1]
    B = len(covered)
    p_load = np.zeros((n_scenarios, B, T))
    p_pv = np.zeros((n_scenarios, B, T))

    day_idx = bootstrap_days(library, n_scenarios, stream.child("irradiance"))
    days = library.days[day_idx]  # (S, T)

    col = {nid: i for i, nid in enumerate(covered)}
    for node_pos, nid in enumerate(load_ids):
        cluster, share = shares[nid]
        target = share * schedule.cluster_energy(cluster, l_energy)
        node_stream = stream.child("load", l_energy, node_pos)
        sampled = models[cluster].sample(target, n_scenarios, node_stream)
        if sampled.shape[1] != T:
            raise ValueError(
                f"cluster {cluster} model produces {sampled.shape[1]} steps per day "
                f"but the irradiance library has {T}"
            )
        p_load[:, col[nid], :] = sampled
    for nid in pv_ids:
        capacity = schedule.pv_capacity(nid, l_pv)
        p_pv[:, col[nid], :] = pv_power(days, capacity)

    return ScenarioSet(
        cell=cell, node_ids=covered, p_load=p_load, p_pv=p_pv, power_factor=power_factor,
        provenance={
            "master_seed": stream.master_seed,
            "stream_prefix": list(stream.path),
            "n_scenarios": n_scenarios,
        },
    )
