"""Radial single-phase-equivalent feeder model and backward-forward sweep solver.

The solver is vectorized over arbitrary leading axes (time steps,
scenarios), iterating all snapshots jointly from a flat start until every
one satisfies the voltage-update tolerance. Fixed points are start-
independent for sane feeders, so this is interchangeable with a
sequential warm-started sweep (covered by tests).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NetworkValidationError

NODE_KINDS = ("slack", "load", "pv", "mixed")


@dataclass
class Node:
    id: str
    kind: str
    cluster: int | None = None
    pv_kwp_min: float = 0.0
    pv_kwp_max: float = 0.0
    base_load_gwh: float = 0.0


@dataclass
class Branch:
    from_id: str
    to_id: str
    r_ohm: float
    x_ohm: float


@dataclass
class FeederNetwork:
    nodes: list[Node]
    branches: list[Branch]
    base_kv: float = 10.0
    base_mva: float = 1.0
    slack_voltage_pu: float = 1.0
    thermal_limit_a: float | None = None  # recorded only, never used in metrics

    _topology: dict = field(default=None, repr=False, compare=False)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def z_base_ohm(self) -> float:
        return self.base_kv ** 2 / self.base_mva

    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def slack(self) -> Node:
        slacks = [n for n in self.nodes if n.kind == "slack"]
        if len(slacks) != 1:
            raise NetworkValidationError([f"expected exactly one slack node, found {len(slacks)}"])
        return slacks[0]

    def load_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind in ("load", "mixed")]

    def pv_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind in ("pv", "mixed")]

    # -- construction ------------------------------------------------------

    @classmethod
    def from_csvs(cls, nodes_path, branches_path, **kwargs) -> "FeederNetwork":
        nodes = []
        with Path(nodes_path).open(newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            for row in reader:
                cluster = row.get("cluster", "")
                nodes.append(Node(
                    id=row["id"],
                    kind=row["type"],
                    cluster=int(cluster) if cluster not in ("", None) else None,
                    pv_kwp_min=float(row.get("pv_kwp_min") or 0.0),
                    pv_kwp_max=float(row.get("pv_kwp_max") or 0.0),
                    base_load_gwh=float(row.get("base_load_gwh") or 0.0),
                ))
        branches = []
        with Path(branches_path).open(newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            for row in reader:
                branches.append(Branch(row["from"], row["to"],
                                       float(row["r_ohm"]), float(row["x_ohm"])))
        net = cls(nodes=nodes, branches=branches, **kwargs)
        problems = validate_network(net)
        if problems:
            raise NetworkValidationError(problems)
        return net


def validate_network(net: FeederNetwork) -> list[str]:
    """Structural checks; returns a list of problems (empty when valid)."""
    problems: list[str] = []
    ids = net.node_ids
    if len(set(ids)) != len(ids):
        problems.append("duplicate node ids")
    slacks = [n.id for n in net.nodes if n.kind == "slack"]
    if len(slacks) != 1:
        problems.append(f"expected exactly one slack node, found {len(slacks)}")
    for n in net.nodes:
        if n.kind not in NODE_KINDS:
            problems.append(f"node {n.id}: unknown type '{n.kind}'")
        if n.pv_kwp_min > n.pv_kwp_max:
            problems.append(f"node {n.id}: pv_kwp_min exceeds pv_kwp_max")
    known = set(ids)
    for b in net.branches:
        if b.from_id not in known or b.to_id not in known:
            problems.append(f"branch {b.from_id}-{b.to_id}: unknown endpoint")
        if b.r_ohm < 0 or b.x_ohm < 0:
            problems.append(f"branch {b.from_id}-{b.to_id}: negative impedance")
        if b.r_ohm == 0 and b.x_ohm == 0:
            problems.append(f"branch {b.from_id}-{b.to_id}: zero impedance magnitude")
    if problems:
        return problems

    if len(net.branches) != len(net.nodes) - 1:
        problems.append(
            f"not radial: {len(net.branches)} branches for {len(net.nodes)} nodes"
        )
    # connectivity/cycle check via BFS from the slack over the undirected graph
    adj: dict[str, list[str]] = {i: [] for i in ids}
    for b in net.branches:
        adj[b.from_id].append(b.to_id)
        adj[b.to_id].append(b.from_id)
    seen = {slacks[0]}
    queue = [slacks[0]]
    while queue:
        cur = queue.pop()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    unreachable = [i for i in ids if i not in seen]
    if unreachable:
        problems.append(f"unreachable nodes: {', '.join(unreachable)}")
    return problems


def _topology(net: FeederNetwork) -> dict:
    """Cache BFS order (slack to leaves), parent links, and branch impedances (p.u.)."""
    if net._topology is not None:
        return net._topology
    problems = validate_network(net)
    if problems:
        raise NetworkValidationError(problems)
    index = net.node_index()
    slack_idx = index[net.slack().id]
    z_pu = {}
    adj: dict[int, list[int]] = {i: [] for i in range(len(net.nodes))}
    for b in net.branches:
        i, j = index[b.from_id], index[b.to_id]
        adj[i].append(j)
        adj[j].append(i)
        z_pu[(i, j)] = z_pu[(j, i)] = complex(b.r_ohm, b.x_ohm) / net.z_base_ohm
    order: list[int] = []  # BFS order excluding slack
    parent = np.full(len(net.nodes), -1)
    queue = [slack_idx]
    seen = {slack_idx}
    while queue:
        cur = queue.pop(0)
        for nxt in sorted(adj[cur]):
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                order.append(nxt)
                queue.append(nxt)
    z_to_parent = np.zeros(len(net.nodes), dtype=complex)
    for i in order:
        z_to_parent[i] = z_pu[(parent[i], i)]
    net._topology = {
        "slack": slack_idx,
        "order": order,
        "parent": parent,
        "z_to_parent": z_to_parent,
    }
    return net._topology


def solve(net: FeederNetwork, p_kw, q_kvar, v0=None, tol: float = 1e-8,
          max_iter: int = 100):
    """Backward-forward sweep over snapshots.

    ``p_kw``/``q_kvar`` have shape ``(..., B)`` aligned with ``net.nodes``;
    positive values consume power (PV injection enters as negative load).
    Returns ``(V, converged, n_iter)`` where ``V`` is complex with the same
    shape and ``converged`` flags each snapshot.
    """
    topo = _topology(net)
    p = np.asarray(p_kw, dtype=float)
    q = np.asarray(q_kvar, dtype=float)
    if p.shape != q.shape or p.shape[-1] != len(net.nodes):
        raise ValueError("p and q must share shape (..., n_nodes)")
    s_pu = (p + 1j * q) / (1000.0 * net.base_mva)

    slack = topo["slack"]
    order = topo["order"]
    parent = topo["parent"]
    z = topo["z_to_parent"]

    V = np.full(p.shape, complex(net.slack_voltage_pu), dtype=complex) if v0 is None \
        else np.array(v0, dtype=complex)
    V[..., slack] = net.slack_voltage_pu
    delta = np.full(p.shape[:-1], np.inf)
    n_iter = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for n_iter in range(1, max_iter + 1):
            # backward: accumulate branch currents from the leaves
            I_acc = np.conj(s_pu / V)
            I_acc[..., slack] = 0.0
            for i in reversed(order):
                I_acc[..., parent[i]] += I_acc[..., i]
            # forward: update voltages from the slack
            V_new = np.empty_like(V)
            V_new[..., slack] = net.slack_voltage_pu
            for i in order:
                V_new[..., i] = V_new[..., parent[i]] - z[i] * I_acc[..., i]
            delta = np.abs(V_new - V).max(axis=-1) if V.ndim > 1 else np.abs(V_new - V).max()
            V = V_new
            if np.all(delta < tol):
                break
    converged = delta < tol
    # sanity band: anything outside (0, 2) p.u. is treated as non-converged
    in_band = ((np.abs(V) > 0.0) & (np.abs(V) < 2.0)).all(axis=-1)
    converged = converged & in_band
    return V, converged, n_iter


def solve_snapshot(net: FeederNetwork, injections_kw: dict[str, float],
                   injections_kvar: dict[str, float], tol: float = 1e-8,
                   max_iter: int = 100) -> dict[str, complex]:
    """Single-snapshot convenience wrapper over node-id keyed injections."""
    index = net.node_index()
    p = np.zeros(len(net.nodes))
    q = np.zeros(len(net.nodes))
    for nid, val in injections_kw.items():
        p[index[nid]] = val
    for nid, val in injections_kvar.items():
        q[index[nid]] = val
    V, converged, _ = solve(net, p, q, tol=tol, max_iter=max_iter)
    if not converged:
        raise FloatingPointError("snapshot did not converge")
    return {nid: complex(V[i]) for nid, i in index.items()}


@dataclass
class VoltageResult:
    """Voltage magnitudes per (scenario, node, time) with convergence flags."""

    v: np.ndarray  # (S, B, T) p.u.
    snapshot_converged: np.ndarray  # (S, T)
    node_ids: list[str]

    @property
    def n_scenarios(self) -> int:
        return self.v.shape[0]

    @property
    def scenario_converged(self) -> np.ndarray:
        return self.snapshot_converged.all(axis=-1)


def simulate_scenarios(net: FeederNetwork, p_kw, q_kvar, tol: float = 1e-8,
                       max_iter: int = 100) -> VoltageResult:
    """Time-series run over ``(S, B, T)`` injection tensors.

    All S*T snapshots are solved jointly; downstream metrics drop whole
    scenarios containing any non-converged snapshot.
    """
    p = np.asarray(p_kw, dtype=float)
    q = np.asarray(q_kvar, dtype=float)
    if p.ndim != 3:
        raise ValueError("expected (S, B, T) injection tensors")
    # solver wants node on the last axis
    V, conv, _ = solve(net, np.moveaxis(p, 1, 2), np.moveaxis(q, 1, 2),
                       tol=tol, max_iter=max_iter)
    v_mag = np.abs(np.moveaxis(V, 2, 1))
    return VoltageResult(v=v_mag, snapshot_converged=conv, node_ids=net.node_ids)
