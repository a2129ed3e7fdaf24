"""Clustering estimators for representative load profiles.

All three follow the scikit-learn estimator protocol (params in
``__init__``, ``fit`` returns self, fitted attributes carry a trailing
underscore) so they compose with pipelines and model-selection tooling.
They are deterministic given a seed/stream, which the Monte Carlo
orchestration relies on.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..validation import check_profile_matrix, check_random_state


def _pairwise_sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances; small n, so the dense form is fine
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


class ProfileKMeans(BaseEstimator):
    """Lloyd's algorithm with k-means++ seeding on profile rows.

    Empty clusters are re-seeded at the point farthest from its assigned
    centroid; iteration stops when assignments are stable.
    """

    def __init__(self, n_clusters: int = 3, max_iter: int = 300, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state

    def _init_plus_plus(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = X.shape[0]
        centers = np.empty((self.n_clusters, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        closest = _pairwise_sq_dists(X, centers[:1]).ravel()
        for j in range(1, self.n_clusters):
            total = closest.sum()
            if total <= 0.0:
                centers[j] = X[rng.integers(n)]
            else:
                probs = closest / total
                centers[j] = X[rng.choice(n, p=probs)]
            closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(axis=1))
        return centers

    def fit(self, X, y=None):
        X = check_profile_matrix(X)
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.n_clusters > X.shape[0]:
            raise ValueError(f"n_clusters={self.n_clusters} exceeds number of samples {X.shape[0]}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        rng = check_random_state(self.random_state)
        centers = self._init_plus_plus(X, rng)
        labels = np.full(X.shape[0], -1)
        for it in range(self.max_iter):
            d2 = _pairwise_sq_dists(X, centers)
            new_labels = d2.argmin(axis=1)
            for j in range(self.n_clusters):
                if not np.any(new_labels == j):
                    # farthest point from its own centroid takes over the empty slot
                    worst = d2[np.arange(X.shape[0]), new_labels].argmax()
                    centers[j] = X[worst]
                    d2 = _pairwise_sq_dists(X, centers)
                    new_labels = d2.argmin(axis=1)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for j in range(self.n_clusters):
                centers[j] = X[labels == j].mean(axis=0)
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = float(_pairwise_sq_dists(X, centers)[np.arange(X.shape[0]), labels].sum())
        self.n_iter_ = it + 1
        return self

    def predict(self, X) -> np.ndarray:
        X = check_profile_matrix(X)
        return _pairwise_sq_dists(X, self.cluster_centers_).argmin(axis=1)


class DiagonalGaussianMixture(BaseEstimator):
    """EM-fitted Gaussian mixture with diagonal covariances.

    Initialized from :class:`ProfileKMeans`; variances are floored at
    ``covariance_floor`` (flagged via ``floored_`` when the floor binds).
    The per-iteration total log-likelihood is kept in
    ``log_likelihood_history_`` so monotonicity can be audited.
    """

    def __init__(self, n_components: int = 3, max_iter: int = 500, tol: float = 1e-6,
                 covariance_floor: float = 1e-6, random_state=None):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.covariance_floor = covariance_floor
        self.random_state = random_state

    def _log_resp(self, X: np.ndarray) -> tuple[np.ndarray, float]:
        # log responsibilities and total log-likelihood under current params
        diff = X[:, None, :] - self.means_[None, :, :]
        log_comp = (
            np.log(self.weights_)[None, :]
            - 0.5 * np.sum(np.log(2.0 * np.pi * self.variances_), axis=1)[None, :]
            - 0.5 * np.sum(diff ** 2 / self.variances_[None, :, :], axis=2)
        )
        m = log_comp.max(axis=1, keepdims=True)
        log_norm = m[:, 0] + np.log(np.exp(log_comp - m).sum(axis=1))
        return log_comp - log_norm[:, None], float(log_norm.sum())

    def fit(self, X, y=None):
        X = check_profile_matrix(X)
        n, d = X.shape
        k = self.n_components
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if k > n:
            raise ValueError(f"n_components={k} exceeds number of samples {n}")
        rng = check_random_state(self.random_state)
        floor = self.covariance_floor
        self.floored_ = False

        init = ProfileKMeans(n_clusters=k, random_state=rng).fit(X)
        means = init.cluster_centers_.copy()
        variances = np.empty((k, d))
        weights = np.empty(k)
        for j in range(k):
            members = X[init.labels_ == j]
            weights[j] = max(len(members), 1) / n
            variances[j] = members.var(axis=0) if len(members) else X.var(axis=0)
        weights /= weights.sum()
        below = variances < floor
        if below.any():
            self.floored_ = True
            variances = np.maximum(variances, floor)

        self.means_, self.variances_, self.weights_ = means, variances, weights
        history: list[float] = []
        self.converged_ = False
        for _ in range(self.max_iter):
            log_resp, loglik = self._log_resp(X)
            history.append(loglik)
            if len(history) > 1 and history[-1] - history[-2] < self.tol:
                self.converged_ = True
                break
            resp = np.exp(log_resp)
            nk = resp.sum(axis=0)
            nk = np.maximum(nk, 1e-300)
            self.weights_ = nk / n
            self.means_ = (resp.T @ X) / nk[:, None]
            diff2 = (X[:, None, :] - self.means_[None, :, :]) ** 2
            variances = np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None]
            below = variances < floor
            if below.any():
                self.floored_ = True
            self.variances_ = np.maximum(variances, floor)
        if not self.converged_:
            # params moved after the last recorded E-step; evaluate once more
            log_resp, loglik = self._log_resp(X)
            history.append(loglik)
        self.log_likelihood_ = history[-1]
        self.log_likelihood_history_ = np.array(history)
        self.labels_ = log_resp.argmax(axis=1)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_profile_matrix(X)
        log_resp, _ = self._log_resp(X)
        return log_resp.argmax(axis=1)


class AverageLinkageClustering(BaseEstimator):
    """Bottom-up average-linkage (UPGMA) merging with Euclidean distances.

    Fully deterministic: distance ties are broken by the smallest pair of
    cluster representative indices (row-major scan). ``merge_sequence_``
    records ``(rep_i, rep_j, distance)`` per merge for auditability.
    """

    def __init__(self, n_clusters: int = 2):
        self.n_clusters = n_clusters

    def fit(self, X, y=None):
        X = check_profile_matrix(X)
        n = X.shape[0]
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.n_clusters > n:
            raise ValueError(f"n_clusters={self.n_clusters} exceeds number of samples {n}")

        D = np.sqrt(np.maximum(_pairwise_sq_dists(X, X), 0.0))
        np.fill_diagonal(D, np.inf)
        # a cluster is represented by its smallest member index
        active = np.ones(n, dtype=bool)
        sizes = np.ones(n, dtype=int)
        members: list[list[int]] = [[i] for i in range(n)]
        merges: list[tuple[int, int, float]] = []
        for _ in range(n - self.n_clusters):
            flat = int(np.argmin(D))  # row-major argmin == smallest (i, j) on ties
            i, j = divmod(flat, n)
            if i > j:
                i, j = j, i
            merges.append((i, j, float(D[i, j])))
            # Lance-Williams update for average linkage
            mask = active.copy()
            mask[i] = mask[j] = False
            D[i, mask] = (sizes[i] * D[i, mask] + sizes[j] * D[j, mask]) / (sizes[i] + sizes[j])
            D[mask, i] = D[i, mask]
            D[j, :] = np.inf
            D[:, j] = np.inf
            sizes[i] += sizes[j]
            members[i].extend(members[j])
            active[j] = False

        labels = np.empty(n, dtype=int)
        reps = sorted(np.flatnonzero(active))
        for lbl, rep in enumerate(reps):
            labels[members[rep]] = lbl
        self.labels_ = labels
        self.merge_sequence_ = merges
        return self
