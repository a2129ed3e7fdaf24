import math

import numpy as np
import pytest

from hostcap.flow import identity_flow
from hostcap.irradiance import IrradianceLibrary
from hostcap.powerflow import Branch, FeederNetwork, Node
from hostcap.rng import RngStream
from hostcap.scenario import (
    GrowthSchedule,
    ScenarioSet,
    build_scenario_set,
    growth_level,
    node_energy_shares,
)


class TestGrowthLevel:
    def test_boundaries(self):
        assert growth_level(1.0, 2.0, 0, 10) == 1.0
        assert growth_level(1.0, 2.0, 10, 10) == 2.0

    def test_linear_midpoint(self):
        assert growth_level(1.0, 2.0, 5, 10) == pytest.approx(1.5)

    def test_concave_sqrt(self):
        gamma = lambda l, L: math.sqrt(l / L)
        assert growth_level(0.0, 1.0, 2.5, 10, gamma) == pytest.approx(0.5)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            growth_level(1.0, 2.0, 11, 10)
        with pytest.raises(ValueError, match="outside"):
            growth_level(1.0, 2.0, -1, 10)


class TestGrowthSchedule:
    def make(self, **kw):
        defaults = dict(
            energy_steps=10, pv_steps=4,
            cluster_energy_bounds={0: (1.0, 2.0), 1: (3.0, 6.0)},
            node_pv_bounds={"a": (0.0, 10.0), "b": (5.0, 5.0)},
        )
        defaults.update(kw)
        return GrowthSchedule(**defaults)

    def test_cluster_energy_and_total(self):
        s = self.make()
        assert s.cluster_energy(0, 5) == pytest.approx(1.5)
        assert s.total_energy(10) == pytest.approx(8.0)

    def test_pv_capacity_closed_forms(self):
        s = self.make()
        assert s.pv_capacity("a", 0) == 0.0
        assert s.pv_capacity("a", 2) == pytest.approx(5.0)
        assert s.pv_capacity("b", 3) == 5.0
        assert s.total_pv_capacity(2) == pytest.approx(10.0)

    def test_total_pv_matches_resummation_oracle(self, rng):
        bounds = {f"n{i}": tuple(sorted(rng.uniform(0, 50, 2))) for i in range(6)}
        s = self.make(node_pv_bounds=bounds)
        l = 3
        oracle = sum(lo + (l / 4) * (hi - lo) for lo, hi in bounds.values())
        assert s.total_pv_capacity(l) == pytest.approx(oracle, rel=1e-12)

    def test_non_anchored_growth_function_rejected(self):
        with pytest.raises(ValueError, match="0 -> 0"):
            self.make(growth_function=lambda l, L: 0.5)

    def test_non_monotone_growth_function_rejected(self):
        wavy = lambda l, L: l / L + 0.3 * math.sin(2 * math.pi * l / L)
        with pytest.raises(ValueError, match="monotone"):
            self.make(growth_function=wavy)

    def test_misordered_bounds_rejected(self):
        with pytest.raises(ValueError, match="out of order"):
            self.make(cluster_energy_bounds={0: (2.0, 1.0)})


def tiny_network():
    return FeederNetwork(
        nodes=[
            Node("S", "slack"),
            Node("L1", "load", cluster=0, base_load_gwh=1.0),
            Node("L2", "mixed", cluster=0, base_load_gwh=3.0, pv_kwp_max=10.0),
            Node("P1", "pv", pv_kwp_max=20.0),
        ],
        branches=[Branch("S", "L1", 0.1, 0.1), Branch("L1", "L2", 0.1, 0.1),
                  Branch("L2", "P1", 0.1, 0.1)],
    )


def stub_model(T, mu_kw=100.0):
    return identity_flow(T, mu=np.full(T, mu_kw), sigma=np.full(T, 1e-6),
                         w_range=(0.01, 100.0))


def single_day_library(T=24, level=500.0):
    return IrradianceLibrary(days=np.full((1, T), level), delta_t=1440.0 / T,
                             dates=["2024-06-01"])


class TestNodeShares:
    def test_proportional_apportionment(self):
        shares = node_energy_shares(tiny_network())
        assert shares["L1"] == (0, pytest.approx(0.25))
        assert shares["L2"] == (0, pytest.approx(0.75))

    def test_missing_cluster_rejected(self):
        net = tiny_network()
        net.nodes[1].cluster = None
        with pytest.raises(ValueError, match="no cluster"):
            node_energy_shares(net)


class TestBuildScenarioSet:
    def test_zero_pv_net_equals_load(self):
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=2, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 0.0), "P1": (0.0, 0.0)})
        ss = build_scenario_set((0, 0), 1, {0: stub_model(24)}, single_day_library(),
                                net, schedule, 0.95, RngStream(1))
        assert np.array_equal(ss.p, ss.p_load)
        assert np.all(ss.p_pv == 0.0)

    def test_determinism_bitwise(self):
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=2, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 10.0), "P1": (0.0, 20.0)})
        kw = dict(models={0: stub_model(24)}, library=single_day_library(), net=net,
                  schedule=schedule, power_factor=0.95, stream=RngStream(2))
        a = build_scenario_set((1, 1), 2, **kw)
        b = build_scenario_set((1, 1), 2, **kw)
        assert np.array_equal(a.p_load, b.p_load)
        assert np.array_equal(a.p_pv, b.p_pv)

    def test_hand_composed_oracle_with_identity_stub(self):
        # the tight-sigma stub makes load essentially its mean, so the net
        # injection must reproduce load - capacity * g / 1000 per node
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=2, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 10.0), "P1": (0.0, 20.0)})
        lib = single_day_library(level=500.0)
        ss = build_scenario_set((0, 2), 1, {0: stub_model(24, mu_kw=100.0)}, lib, net,
                                schedule, 0.95, RngStream(3))
        b = ss.node_ids.index("L2")
        assert ss.p[0, b] == pytest.approx(100.0 - 10.0 * 500.0 / 1000.0, abs=1e-3)
        b = ss.node_ids.index("P1")
        assert ss.p[0, b] == pytest.approx(-20.0 * 500.0 / 1000.0, abs=1e-12)

    def test_reactive_power_from_load_only(self):
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=2, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 10.0), "P1": (0.0, 20.0)})
        ss = build_scenario_set((0, 2), 1, {0: stub_model(24)}, single_day_library(),
                                net, schedule, 0.95, RngStream(4))
        tan_phi = math.tan(math.acos(0.95))
        assert ss.q == pytest.approx(ss.p_load * tan_phi, rel=1e-12)

    def test_missing_model_error_lists_nodes(self):
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=2, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 0.0), "P1": (0.0, 0.0)})
        with pytest.raises(ValueError, match="L1, L2"):
            build_scenario_set((0, 0), 1, {}, single_day_library(), net, schedule,
                               0.95, RngStream(5))

    def test_energy_conditioning_tracks_growth_axis(self):
        # same pv step, higher energy step -> strictly larger conditioning target
        net = tiny_network()
        schedule = GrowthSchedule(energy_steps=4, pv_steps=2,
                                  cluster_energy_bounds={0: (4.0, 8.0)},
                                  node_pv_bounds={"L2": (0.0, 0.0), "P1": (0.0, 0.0)})

        class Capture:
            def __init__(self):
                self.targets = []

            def sample(self, w, n, stream):
                self.targets.append(w)
                return np.full((n, 24), 1.0)

        cap = Capture()
        for l in (0, 2, 4):
            build_scenario_set((l, 0), 1, {0: cap}, single_day_library(), net,
                               schedule, 0.95, RngStream(6))
        l1_targets = cap.targets[0::2]
        assert l1_targets == sorted(l1_targets)
        assert l1_targets[0] == pytest.approx(1.0)   # share 0.25 of 4.0
        assert l1_targets[-1] == pytest.approx(2.0)  # share 0.25 of 8.0


class TestScenarioSetPersistence:
    def test_save_load_round_trip_and_identity_check(self, tmp_path, rng):
        ss = ScenarioSet(cell=(2, 3), node_ids=["a", "b"],
                         p_load=rng.uniform(0, 100, (4, 2, 24)),
                         p_pv=rng.uniform(0, 50, (4, 2, 24)),
                         power_factor=0.95, provenance={"master_seed": 1})
        path = tmp_path / "cell.npz"
        ss.save(path)
        back = ScenarioSet.load(path)
        assert back.cell == (2, 3)
        assert back.node_ids == ["a", "b"]
        assert np.array_equal(back.p, back.p_load - back.p_pv)
        assert back.p_load == pytest.approx(ss.p_load, rel=1e-6)  # float32 storage

    def test_corrupted_components_rejected(self, tmp_path, rng):
        ss = ScenarioSet(cell=(0, 0), node_ids=["a"],
                         p_load=rng.uniform(0, 100, (2, 1, 8)),
                         p_pv=np.zeros((2, 1, 8)), power_factor=0.9)
        path = tmp_path / "cell.npz"
        ss.save(path)
        data = dict(np.load(path))
        data["p_net"] = data["p_net"] + np.float32(1.0)
        np.savez(path, **data)
        with pytest.raises(ValueError, match="identity"):
            ScenarioSet.load(path)

    def test_injection_view(self, rng):
        ss = ScenarioSet(cell=(0, 0), node_ids=["a", "b"],
                         p_load=rng.uniform(0, 100, (2, 2, 8)),
                         p_pv=rng.uniform(0, 20, (2, 2, 8)), power_factor=0.9)
        inj = ss.injection(1, "b")
        assert inj.p == pytest.approx(ss.p[1, 1], rel=1e-12)
        assert inj.q == pytest.approx(ss.q[1, 1], rel=1e-12)
