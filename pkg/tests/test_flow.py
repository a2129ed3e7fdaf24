import math

import numpy as np
import pytest

from hostcap.flow import ConditionalCouplingFlow, TrainConfig, identity_flow, load_flow
from hostcap.flow.coupling import CouplingStack
from hostcap.profiles import annual_energy_of
from hostcap.rng import RngStream

LOG_2PI = math.log(2.0 * math.pi)


def random_stack(n_dims, n_layers, hidden, scale, seed):
    rng = np.random.default_rng(seed)
    stack = CouplingStack(n_dims, n_layers, hidden, 5.0, rng)
    stack.set_parameters([rng.normal(0, scale, p.shape) for p in stack.parameters()])
    return stack


def random_model(n_dims, seed, n_layers=4, hidden=8, scale=0.4):
    """Flow with randomized conditioners and a non-trivial standardizer."""
    rng = np.random.default_rng(seed)
    model = identity_flow(n_dims, mu=rng.uniform(10, 20, n_dims),
                          sigma=rng.uniform(0.5, 3.0, n_dims), w_range=(0.25, 4.0))
    model.stack_ = random_stack(n_dims, n_layers, hidden, scale, seed + 1)
    return model


class TestIdentityFlow:
    def test_forward_is_destandardization_only(self, rng):
        model = identity_flow(3)
        Z = rng.standard_normal((5, 3))
        P, logdet = model.transform_base(Z, 1.0)
        assert np.array_equal(P, Z)
        assert np.all(logdet == 0.0)

    def test_inverse_identity_and_zero_logdet(self, rng):
        model = identity_flow(4)
        X = rng.standard_normal((6, 4))
        Z, logdet = model.inverse_transform(X, 1.0)
        assert np.array_equal(Z, X)
        assert np.all(logdet == 0.0)

    def test_loglik_standard_normal_at_origin(self):
        model = identity_flow(2)
        ll = model.log_likelihood(np.zeros((1, 2)), 1.0)[0]
        assert ll == pytest.approx(-LOG_2PI, abs=1e-12)

    def test_loglik_unit_point(self):
        model = identity_flow(2)
        ll = model.log_likelihood(np.array([[1.0, 0.0]]), 1.0)[0]
        assert ll == pytest.approx(-LOG_2PI - 0.5, abs=1e-12)


class TestHandComputedCoupling:
    def test_single_layer_matches_pencil_and_paper(self):
        # T=2, one layer: dim 0 passes through, dim 1 transformed; the
        # conditioner is overwritten with tiny hand-set weights
        model = identity_flow(2)
        model.stack_ = CouplingStack(2, 1, 2, 5.0, np.random.default_rng(0))
        W1 = np.array([[0.5, -0.2], [0.1, 0.3]])   # (in=2: x0, w) -> hidden 2
        b1 = np.array([0.05, -0.1])
        W2 = np.array([[1.0, 0.0], [0.0, 1.0]])
        b2 = np.array([0.0, 0.0])
        W3 = np.array([[0.7, -0.4], [0.2, 0.6]])   # hidden -> (s_raw, t)
        b3 = np.array([0.1, 0.2])
        model.stack_.nets[0].set_parameters([W1, b1, W2, b2, W3, b3])

        z = np.array([[0.3, -1.2]])
        w_std = np.array([0.0])  # w equal to the standardizer mean
        out, sum_s = model.stack_.forward(z, w_std)

        h1 = np.tanh(np.array([0.3, 0.0]) @ W1 + b1)
        h2 = np.tanh(h1 @ W2 + b2)
        raw = h2 @ W3 + b3
        s = 5.0 * math.tanh(raw[0] / 5.0)
        t = raw[1]
        assert out[0, 0] == pytest.approx(0.3, abs=1e-15)
        assert out[0, 1] == pytest.approx(-1.2 * math.exp(s) + t, abs=1e-12)
        assert sum_s[0] == pytest.approx(s, abs=1e-12)


class TestInvertibility:
    @pytest.mark.parametrize("n_dims,n_layers", [(2, 2), (4, 4), (7, 6), (96, 6)])
    def test_round_trip_both_ways(self, n_dims, n_layers, rng):
        model = random_model(n_dims, seed=n_dims, n_layers=n_layers)
        w = rng.uniform(0.5, 2.0, 200)
        Z = rng.standard_normal((200, n_dims))
        P, _ = model.transform_base(Z, w)
        Z2, _ = model.inverse_transform(P, w)
        assert np.abs(Z2 - Z).max() < 1e-6
        X = model.mu_ + rng.standard_normal((200, n_dims)) * model.sigma_
        Zx, _ = model.inverse_transform(X, w)
        X2, _ = model.transform_base(Zx, w)
        assert np.abs(X2 - X).max() < 1e-6

    def test_logdet_inverse_negates_forward(self, rng):
        model = random_model(4, seed=11)
        w = rng.uniform(0.5, 2.0, 30)
        Z = rng.standard_normal((30, 4))
        P, logdet_fwd = model.transform_base(Z, w)
        _, logdet_inv = model.inverse_transform(P, w)
        assert np.abs(logdet_inv + logdet_fwd).max() < 1e-8


class TestLogDetAgainstNumericalJacobian:
    @pytest.mark.parametrize("n_dims", [1, 2, 3, 4])
    def test_matches_central_differences(self, n_dims, rng):
        model = random_model(n_dims, seed=100 + n_dims)
        x0 = model.mu_ + rng.standard_normal(n_dims) * model.sigma_
        w = np.array([1.3])
        h = 1e-5
        J = np.zeros((n_dims, n_dims))
        for j in range(n_dims):
            e = np.zeros(n_dims)
            e[j] = h
            zp, _ = model.inverse_transform((x0 + e)[None, :], w)
            zm, _ = model.inverse_transform((x0 - e)[None, :], w)
            J[:, j] = (zp[0] - zm[0]) / (2 * h)
        _, logabsdet = np.linalg.slogdet(J)
        _, logdet = model.inverse_transform(x0[None, :], w)
        assert abs(logdet[0] - logabsdet) / max(abs(logabsdet), 1e-12) < 1e-4


class TestLogLikelihood:
    def test_recomposition_oracle(self, rng):
        model = random_model(5, seed=21)
        X = model.mu_ + rng.standard_normal((20, 5)) * model.sigma_
        w = rng.uniform(0.5, 2.0, 20)
        ll = model.log_likelihood(X, w)
        Z, logdet = model.inverse_transform(X, w)
        base = -0.5 * (Z ** 2).sum(axis=1) - 0.5 * 5 * LOG_2PI
        assert np.abs(ll - (base + logdet)).max() < 1e-10

    def test_t1_density_integrates_to_one(self):
        model = random_model(1, seed=31, n_layers=4, scale=0.5)
        # T=1 couplings condition on w alone, so the map is affine in x:
        # integrate the density over a generous grid around the image of +-8
        w = np.array([1.1])
        lo = model.transform_base(np.array([[-8.0]]), w)[0][0, 0]
        hi = model.transform_base(np.array([[8.0]]), w)[0][0, 0]
        lo, hi = min(lo, hi), max(lo, hi)
        grid = np.linspace(lo, hi, 4001)
        dens = np.exp(model.log_likelihood(grid[:, None], np.full(grid.size, 1.1)))
        mass = np.trapezoid(dens, grid)
        assert 0.99 <= mass <= 1.01


class TestGradients:
    def test_nll_gradient_matches_central_differences(self, rng):
        model = random_model(4, seed=41, n_layers=3, hidden=6, scale=0.3)
        X = model.mu_ + rng.standard_normal((12, 4)) * model.sigma_
        w = rng.uniform(0.5, 2.0, 12)

        def mean_nll():
            return float(-model.log_likelihood(X, w).mean())

        nll, Z, caches = model._nll(X, w, want_cache=True)
        grads = model.stack_.backward_nll(caches, Z)
        params = model.stack_.parameters()
        picks = rng.choice(len(params), size=10, replace=True)
        for k in picks:
            p = params[int(k)]
            pos = tuple(rng.integers(0, d) for d in p.shape)
            old = p[pos]
            eps = 1e-5
            p[pos] = old + eps
            f_plus = mean_nll()
            p[pos] = old - eps
            f_minus = mean_nll()
            p[pos] = old
            fd = (f_plus - f_minus) / (2 * eps)
            an = grads[int(k)][pos]
            assert abs(fd - an) / max(abs(fd), 1e-8) < 1e-3


def conditional_gaussian_data(rng, n=600, T=4, noise_kw=5.0):
    """Profiles whose level tracks the annual-energy label exactly."""
    kw_per_gwh = 1e6 / (365.0 * 24.0)
    w = rng.uniform(0.5, 2.0, n)
    P = np.maximum(w[:, None] * kw_per_gwh + rng.normal(0, noise_kw, (n, T)), 0.0)
    return P, w


class TestTraining:
    def test_zero_learning_rate_is_a_null_update(self, rng):
        P, w = conditional_gaussian_data(rng, n=80)
        # with lr=0 extra epochs must change nothing, bitwise
        one = ConditionalCouplingFlow(n_layers=2, hidden_units=4, learning_rate=0.0,
                                      max_epochs=1, patience=10,
                                      random_state=RngStream(1)).fit(P, w)
        five = ConditionalCouplingFlow(n_layers=2, hidden_units=4, learning_rate=0.0,
                                       max_epochs=5, patience=10,
                                       random_state=RngStream(1)).fit(P, w)
        for a, b in zip(one.stack_.parameters(), five.stack_.parameters()):
            assert np.array_equal(a, b)
        # and the head layers are still exactly zero (identity coupling)
        for net in one.stack_.nets:
            assert np.all(net.W3 == 0.0) and np.all(net.b3 == 0.0)

    def test_too_small_dataset_rejected(self, rng):
        P, w = conditional_gaussian_data(rng, n=20)
        with pytest.raises(ValueError, match="training pairs"):
            ConditionalCouplingFlow().fit(P, w)

    def test_short_training_improves_validation_nll(self, rng):
        P, w = conditional_gaussian_data(rng, n=400)
        model = ConditionalCouplingFlow(n_layers=4, hidden_units=16, max_epochs=25,
                                        random_state=RngStream(2)).fit(P, w)
        assert model.history_["val_nll"][-1] < model.history_["val_nll"][0]
        assert model.best_val_nll_ <= model.history_["val_nll"][0]

    def test_best_checkpoint_is_running_minimum(self, rng):
        P, w = conditional_gaussian_data(rng, n=200)
        model = ConditionalCouplingFlow(n_layers=2, hidden_units=8, max_epochs=15,
                                        random_state=RngStream(3)).fit(P, w)
        assert model.best_val_nll_ <= min(model.history_["val_nll"]) + 1e-12


class TestSampling:
    def test_identity_flow_base_passthrough(self):
        model = identity_flow(3)
        samples = model.sample(1.0, 10_000, RngStream(5))
        # clipped at zero, so compare against the clipped-normal mean
        assert samples.mean() == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=0.05)
        assert samples.min() >= 0.0

    def test_unclipped_identity_flow_mean(self):
        model = identity_flow(2, mu=[50.0, 50.0])  # far from the clip boundary
        samples = model.sample(1.0, 10_000, RngStream(6))
        assert np.abs(samples.mean(axis=0) - 50.0).max() < 0.05

    def test_deterministic_given_stream(self):
        model = random_model(4, seed=51)
        a = model.sample(1.0, 32, RngStream(7).child("s"))
        b = model.sample(1.0, 32, RngStream(7).child("s"))
        assert np.array_equal(a, b)

    def test_soft_range_warning(self, recwarn):
        import warnings as _w
        model = identity_flow(2, mu=[50, 50], w_range=(1.0, 2.0))
        with _w.catch_warnings():
            _w.simplefilter("error", UserWarning)
            model.sample(1.5, 4, RngStream(8))  # inside: no warning
            with pytest.raises(UserWarning, match="soft range"):
                model.sample(10.0, 4, RngStream(8))

    def test_clip_fraction_tracked(self):
        model = identity_flow(2)  # standard normal: ~50% of mass below zero
        model.sample(1.0, 2000, RngStream(9))
        assert model.last_clip_fraction_ > 0.4


class TestConditioningFidelity:
    def test_requested_vs_realized_energy_correlation(self, rng):
        P, w = conditional_gaussian_data(rng, n=700, T=4, noise_kw=8.0)
        model = ConditionalCouplingFlow(n_layers=4, hidden_units=24, max_epochs=60,
                                        patience=60, random_state=RngStream(10)).fit(P, w)
        requested, realized = [], []
        for i, target in enumerate((0.5, 1.0, 2.0)):
            samples = model.sample(target, 200, RngStream(11).child(i))
            for s in samples:
                requested.append(target)
                realized.append(annual_energy_of(s, 360.0))
        corr = np.corrcoef(requested, realized)[0, 1]
        assert corr >= 0.9


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path, rng):
        P, w = conditional_gaussian_data(rng, n=120)
        model = ConditionalCouplingFlow(n_layers=3, hidden_units=8, max_epochs=5,
                                        random_state=RngStream(12),
                                        cluster_id=2).fit(P, w)
        path = tmp_path / "model.npz"
        model.save(path)
        back = load_flow(path)
        assert back.cluster_id == 2
        assert np.array_equal(back.mu_, model.mu_)
        X = P[:10]
        assert np.array_equal(back.log_likelihood(X, w[:10]),
                              model.log_likelihood(X, w[:10]))
        assert np.array_equal(back.sample(1.0, 8, RngStream(13)),
                              model.sample(1.0, 8, RngStream(13)))

    def test_version_check(self, tmp_path, rng):
        P, w = conditional_gaussian_data(rng, n=60)
        model = ConditionalCouplingFlow(n_layers=2, hidden_units=4, max_epochs=2,
                                        random_state=RngStream(14)).fit(P, w)
        path = tmp_path / "m.npz"
        model.save(path)
        import json
        data = dict(np.load(path))
        meta = json.loads(bytes(data["meta_json"]).decode())
        meta["format_version"] = 99
        data["meta_json"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        np.savez(path, **data)
        with pytest.raises(ValueError, match="format version"):
            load_flow(path)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(val_fraction=0.7)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    TrainConfig()  # defaults valid
