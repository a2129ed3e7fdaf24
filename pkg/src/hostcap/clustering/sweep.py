"""Representative profiles, the (algorithm x k) sweep, and partition selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..profiles import LoadProfileSet
from ..rng import RngStream
from .estimators import AverageLinkageClustering, DiagonalGaussianMixture, ProfileKMeans
from .indices import ValidityScores, validity_indices

ALGORITHMS = ("kmeans", "gmm", "agglomerative")

#: SI below which an automated selection is flagged as low-confidence.
LOW_CONFIDENCE_SI = 0.25


@dataclass
class RepresentativeProfiles:
    """M x T matrix of per-transformer mean daily profiles (kW)."""

    matrix: np.ndarray
    transformer_ids: list[str]


@dataclass
class ClusterAssignment:
    n_clusters: int
    labels: np.ndarray  # per-transformer cluster id in {0..k-1}
    algorithm: str
    member_sets: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if not self.member_sets:
            self.member_sets = [list(np.flatnonzero(self.labels == c)) for c in range(self.n_clusters)]
        covered = sorted(m for s in self.member_sets for m in s)
        if covered != list(range(self.labels.size)):
            raise ValueError("member sets must partition the transformer indices")
        if any(len(s) == 0 for s in self.member_sets):
            raise ValueError("every cluster must be non-empty")

    @property
    def cluster_sizes(self) -> list[int]:
        return [len(s) for s in self.member_sets]


def representative_profiles(data: LoadProfileSet) -> RepresentativeProfiles:
    """Time-wise mean over each transformer's records."""
    matrix = np.vstack([p.mean(axis=0) for p in data.profiles])
    return RepresentativeProfiles(matrix=matrix, transformer_ids=list(data.transformer_ids))


def fit_algorithm(matrix: np.ndarray, algorithm: str, k: int, stream: RngStream | None = None):
    """Fit one clustering algorithm and wrap its labels as an assignment."""
    if algorithm == "kmeans":
        est = ProfileKMeans(n_clusters=k, random_state=stream).fit(matrix)
    elif algorithm == "gmm":
        est = DiagonalGaussianMixture(n_components=k, random_state=stream).fit(matrix)
    elif algorithm == "agglomerative":
        est = AverageLinkageClustering(n_clusters=k).fit(matrix)
    else:
        raise ValueError(f"unknown clustering algorithm '{algorithm}'")
    return ClusterAssignment(n_clusters=k, labels=est.labels_, algorithm=algorithm), est


@dataclass
class SweepRow:
    algorithm: str
    k: int
    scores: ValidityScores
    cluster_sizes: list[int]


@dataclass
class SweepResult:
    best: ClusterAssignment
    best_algorithm: str
    best_k: int
    table: list[SweepRow]
    per_algorithm_best_k: dict[str, int]
    low_confidence: bool


def _vote(rows: list[SweepRow]) -> int:
    """Index of the row preferred by a majority of the five indices.

    Each index votes for the row it scores best (DBI inverted); ties on
    vote count are broken by the higher silhouette.
    """
    cols = {
        "si": max, "chi": max, "dbi": min, "di": max, "mdi": max,
    }
    votes = np.zeros(len(rows), dtype=int)
    for name, better in cols.items():
        values = [getattr(r.scores, name) for r in rows]
        target = better(values)
        votes[values.index(target)] += 1
    order = sorted(
        range(len(rows)),
        key=lambda i: (votes[i], rows[i].scores.si),
        reverse=True,
    )
    return order[0]


def sweep_select(matrix: np.ndarray, k_range, algorithms=ALGORITHMS,
                 stream: RngStream | None = None, normalize: bool = False) -> SweepResult:
    """Score every (algorithm, k) cell and select a partition by index vote.

    ``normalize=True`` z-scores each time step before clustering (profiles
    are clustered in raw kW by default).
    """
    X = np.asarray(matrix, dtype=float)
    if normalize:
        std = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2:
        raise ValueError("k range must contain values >= 2")
    if ks[-1] >= X.shape[0]:
        raise ValueError("largest k must be below the number of transformers")

    rows: list[SweepRow] = []
    fits: dict[tuple[str, int], ClusterAssignment] = {}
    for algorithm in algorithms:
        for k in ks:
            sub = stream.child("cluster", algorithm, k) if stream is not None else None
            assignment, _ = fit_algorithm(X, algorithm, k, sub)
            scores = validity_indices(X, assignment.labels)
            rows.append(SweepRow(algorithm=algorithm, k=k, scores=scores,
                                 cluster_sizes=assignment.cluster_sizes))
            fits[(algorithm, k)] = assignment

    winner = rows[_vote(rows)]
    per_algo = {}
    for a in algorithms:
        sub_rows = [r for r in rows if r.algorithm == a]
        per_algo[a] = sub_rows[_vote(sub_rows)].k

    return SweepResult(
        best=fits[(winner.algorithm, winner.k)],
        best_algorithm=winner.algorithm,
        best_k=winner.k,
        table=rows,
        per_algorithm_best_k=per_algo,
        low_confidence=winner.scores.si < LOW_CONFIDENCE_SI,
    )


def relabel_by_mean_power(assignment: ClusterAssignment, matrix: np.ndarray) -> ClusterAssignment:
    """Canonical labels: clusters ordered by ascending centroid mean power.

    Clustering labels are permutation-arbitrary; network files reference
    cluster ids, so a stable convention is needed. Cluster 0 is the
    lowest-consumption group.
    """
    X = np.asarray(matrix, dtype=float)
    means = [X[assignment.labels == c].mean() for c in range(assignment.n_clusters)]
    order = sorted(range(assignment.n_clusters), key=lambda c: (means[c], c))
    remap = {old: new for new, old in enumerate(order)}
    labels = np.array([remap[c] for c in assignment.labels])
    return ClusterAssignment(n_clusters=assignment.n_clusters, labels=labels,
                             algorithm=assignment.algorithm)
