import numpy as np
import pytest

from hostcap.errors import NetworkValidationError
from hostcap.powerflow import (
    Branch,
    FeederNetwork,
    Node,
    simulate_scenarios,
    solve,
    solve_snapshot,
    validate_network,
)


def two_bus(r=1.0, x=1.0):
    return FeederNetwork(
        nodes=[Node("S", "slack"), Node("L", "load")],
        branches=[Branch("S", "L", r, x)],
    )


def ladder(n=5, r=0.3, x=0.2):
    nodes = [Node("N0", "slack")] + [Node(f"N{i}", "load") for i in range(1, n)]
    branches = [Branch(f"N{i}", f"N{i+1}", r, x) for i in range(n - 1)]
    return FeederNetwork(nodes=nodes, branches=branches)


def two_bus_analytic_vm(p_pu, q_pu, r_pu, x_pu, v1=1.0):
    """Exact |V2| from the single-line voltage-drop quadratic."""
    b = v1 ** 2 / 2 - (p_pu * r_pu + q_pu * x_pu)
    v2_sq = b + np.sqrt(b ** 2 - (p_pu ** 2 + q_pu ** 2) * (r_pu ** 2 + x_pu ** 2))
    return float(np.sqrt(v2_sq))


def ybus_residual(net, V, p_kw, q_kvar):
    """Independent check: re-substitute V into the admittance equations."""
    index = net.node_index()
    n = len(net.nodes)
    Y = np.zeros((n, n), complex)
    for b in net.branches:
        i, j = index[b.from_id], index[b.to_id]
        y = 1.0 / (complex(b.r_ohm, b.x_ohm) / net.z_base_ohm)
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    s_inj = V * np.conj(V @ Y.T)  # batched (..., n) voltages
    s_spec = -(np.asarray(p_kw) + 1j * np.asarray(q_kvar)) / (1000.0 * net.base_mva)
    slack = index[net.slack().id]
    mask = np.ones(n, dtype=bool)
    mask[slack] = False
    return np.abs(s_inj[..., mask] - s_spec[..., mask]).max()


class TestValidation:
    def test_two_node_line_ok(self):
        assert validate_network(two_bus()) == []

    def test_cycle_rejected(self):
        net = FeederNetwork(
            nodes=[Node("A", "slack"), Node("B", "load"), Node("C", "load")],
            branches=[Branch("A", "B", 1, 1), Branch("B", "C", 1, 1), Branch("C", "A", 1, 1)],
        )
        assert any("not radial" in p for p in validate_network(net))

    def test_unreachable_node_rejected(self):
        net = FeederNetwork(
            nodes=[Node("A", "slack"), Node("B", "load"), Node("C", "load"), Node("D", "load")],
            branches=[Branch("A", "B", 1, 1), Branch("C", "D", 1, 1),
                      Branch("D", "C", 1, 1)],
        )
        problems = validate_network(net)
        assert any("unreachable" in p for p in problems)

    def test_two_slacks_rejected(self):
        net = FeederNetwork(
            nodes=[Node("A", "slack"), Node("B", "slack")],
            branches=[Branch("A", "B", 1, 1)],
        )
        assert any("exactly one slack" in p for p in validate_network(net))

    def test_zero_impedance_rejected(self):
        net = two_bus(r=0.0, x=0.0)
        assert any("zero impedance" in p for p in validate_network(net))

    def test_csv_loader_raises_on_invalid(self, tmp_path):
        (tmp_path / "nodes.csv").write_text("id,type\nA,slack\nB,load\nC,load\n")
        (tmp_path / "branches.csv").write_text("from,to,r_ohm,x_ohm\nA,B,1,1\n")
        with pytest.raises(NetworkValidationError):
            FeederNetwork.from_csvs(tmp_path / "nodes.csv", tmp_path / "branches.csv")


class TestSolveSnapshot:
    def test_zero_injection_exact_slack_voltage(self):
        V = solve_snapshot(ladder(), {}, {})
        assert all(v == 1.0 + 0j for v in V.values())

    def test_two_bus_matches_analytic(self):
        net = two_bus()  # 0.01 + j0.01 pu
        V = solve_snapshot(net, {"L": 100.0}, {"L": 30.0})
        want = two_bus_analytic_vm(0.1, 0.03, 0.01, 0.01)
        assert abs(abs(V["L"]) - want) < 1e-8

    def test_reverse_flow_voltage_rise(self):
        net = two_bus()
        V = solve_snapshot(net, {"L": -100.0}, {"L": 0.0})
        assert abs(V["L"]) > 1.0
        # sign-matched two-bus oracle with negative P
        want = two_bus_analytic_vm(-0.1, 0.0, 0.01, 0.01)
        assert abs(abs(V["L"]) - want) < 1e-8

    def test_heavy_loading_non_convergence_flagged(self):
        net = two_bus(r=30.0, x=30.0)
        # beyond the deliverable power limit: no power-flow solution exists
        V, converged, _ = solve(net, np.array([0.0, 2000.0]), np.array([0.0, 500.0]))
        assert not converged


class TestResiduals:
    def test_five_bus_ladder_random_day(self, rng):
        net = ladder()
        p = np.zeros((24, 5))
        q = np.zeros((24, 5))
        p[:, 1:] = rng.uniform(-60, 120, (24, 4))
        q[:, 1:] = rng.uniform(-30, 40, (24, 4))
        V, converged, _ = solve(net, p, q)
        assert np.all(converged)
        assert ybus_residual(net, V, p, q) < 1e-6

    def test_mixed_generation_and_load(self, rng):
        net = ladder(7, r=0.5, x=0.3)
        p = np.concatenate([[0.0], rng.uniform(-80, 80, 6)])
        q = np.concatenate([[0.0], rng.uniform(-20, 20, 6)])
        V, converged, _ = solve(net, p, q)
        assert converged
        assert ybus_residual(net, V, p, q) < 1e-6


class TestMonotonicity:
    def test_pure_load_voltage_never_rises_downstream(self, rng):
        net = ladder(6)
        for _ in range(100):
            p = np.concatenate([[0.0], rng.uniform(0, 100, 5)])
            q = np.concatenate([[0.0], rng.uniform(0, 30, 5)])
            V, converged, _ = solve(net, p, q)
            assert converged
            vm = np.abs(V)
            assert np.all(np.diff(vm) <= 1e-12)  # ladder order equals path order


class TestStartIndependence:
    def test_warm_start_equals_flat_start(self, rng):
        net = ladder()
        p_day = np.zeros((24, 5))
        q_day = np.zeros((24, 5))
        p_day[:, 1:] = rng.uniform(0, 150, (24, 4))
        q_day[:, 1:] = rng.uniform(0, 50, (24, 4))
        flat, conv_flat, _ = solve(net, p_day, q_day)
        warm = np.empty_like(flat)
        v_prev = None
        for t in range(24):
            v0 = None if v_prev is None else v_prev
            V, conv, _ = solve(net, p_day[t], q_day[t], v0=v0)
            warm[t] = V
            v_prev = V
        assert np.all(conv_flat)
        assert np.abs(np.abs(warm) - np.abs(flat)).max() < 1e-8


class TestScalingBehaviour:
    def test_double_impedance_half_power_keeps_small_drops(self, rng):
        net_a = ladder(4, r=0.2, x=0.1)
        net_b = ladder(4, r=0.4, x=0.2)
        p = np.concatenate([[0.0], rng.uniform(5, 40, 3)])
        q = 0.2 * p
        Va, _, _ = solve(net_a, p, q)
        Vb, _, _ = solve(net_b, p / 2, q / 2)
        drop_a = 1.0 - np.abs(Va)
        drop_b = 1.0 - np.abs(Vb)
        small = drop_a < 0.02
        assert np.all(np.abs(drop_a[small] - drop_b[small])
                      <= 0.05 * np.maximum(drop_a[small], 1e-12))


class TestSimulateScenarios:
    def test_constant_injection_time_invariance(self, rng):
        net = ladder()
        p = np.concatenate([[0.0], rng.uniform(0, 80, 4)])
        q = 0.3 * p
        P = np.tile(p[:, None], (1, 12))[None]
        Q = np.tile(q[:, None], (1, 12))[None]
        res = simulate_scenarios(net, P, Q)
        assert np.ptp(res.v, axis=2).max() == 0.0
        one, _, _ = solve(net, p, q)
        assert res.v[0, :, 0] == pytest.approx(np.abs(one), abs=1e-12)

    def test_zero_day_flat_profile(self):
        net = ladder()
        res = simulate_scenarios(net, np.zeros((2, 5, 8)), np.zeros((2, 5, 8)))
        assert np.all(res.v == 1.0)
        assert np.all(res.scenario_converged)

    def test_snapshot_flags_shape(self, rng):
        net = ladder()
        P = rng.uniform(0, 50, (3, 5, 6))
        P[:, 0, :] = 0.0
        res = simulate_scenarios(net, P, 0.3 * P)
        assert res.snapshot_converged.shape == (3, 6)
        assert res.v.shape == (3, 5, 6)
