"""Internal clustering validity indices.

Five indices scored on a partition of profile rows: silhouette (SI),
Calinski-Harabasz (CHI), Davies-Bouldin (DBI), Dunn (DI), and a
centroid-based modified Dunn (MDI). Higher is better for all but DBI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import as_float_array


@dataclass(frozen=True)
class ValidityScores:
    si: float
    chi: float
    dbi: float
    di: float
    mdi: float
    degenerate: bool = False  # True when a zero denominator produced +inf

    def as_dict(self) -> dict[str, float]:
        return {"si": self.si, "chi": self.chi, "dbi": self.dbi, "di": self.di, "mdi": self.mdi}


def validity_indices(X, labels) -> ValidityScores:
    """Score a partition with all five indices.

    Requires k >= 2 non-empty clusters. Singleton clusters contribute a
    silhouette term of 0 for their point; zero denominators in DI/MDI
    yield +inf and set the ``degenerate`` flag.
    """
    X = as_float_array(X, "X", ndim=2)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per row of X")
    uniq = np.unique(labels)
    k = uniq.size
    n = X.shape[0]
    if k < 2:
        raise ValueError("validity indices require at least two clusters")
    if k >= n:
        raise ValueError("validity indices require at least one cluster with > 1 point")

    idx_of = {c: np.flatnonzero(labels == c) for c in uniq}
    D = np.sqrt(np.maximum(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2), 0.0))

    centroids = np.vstack([X[idx_of[c]].mean(axis=0) for c in uniq])
    sizes = np.array([idx_of[c].size for c in uniq])

    # silhouette
    si_terms = np.zeros(n)
    for ci, c in enumerate(uniq):
        own = idx_of[c]
        if own.size == 1:
            continue  # singleton convention: term stays 0
        for i in own:
            a = D[i, own].sum() / (own.size - 1)
            b = min(D[i, idx_of[o]].mean() for o in uniq if o != c)
            denom = max(a, b)
            si_terms[i] = 0.0 if denom == 0.0 else (b - a) / denom
    si = float(si_terms.mean())

    # Calinski-Harabasz
    overall = X.mean(axis=0)
    between = float((sizes * ((centroids - overall) ** 2).sum(axis=1)).sum())
    within = float(sum(((X[idx_of[c]] - centroids[ci]) ** 2).sum() for ci, c in enumerate(uniq)))
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = (between / (k - 1)) / (within / (n - k)) if within > 0 else np.inf

    # Davies-Bouldin
    scatter = np.array([
        np.sqrt(((X[idx_of[c]] - centroids[ci]) ** 2).sum(axis=1)).mean()
        for ci, c in enumerate(uniq)
    ])
    cd = np.sqrt(np.maximum(((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2), 0.0))
    ratios = np.zeros((k, k))
    degenerate = False
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            if cd[i, j] == 0.0:
                ratios[i, j] = np.inf
                degenerate = True
            else:
                ratios[i, j] = (scatter[i] + scatter[j]) / cd[i, j]
    dbi = float(ratios.max(axis=1).mean())

    # Dunn: min single-link separation / max diameter
    min_sep = min(
        D[np.ix_(idx_of[a], idx_of[b])].min()
        for ai, a in enumerate(uniq) for b in uniq[ai + 1:]
    )
    max_diam = max(
        (D[np.ix_(idx_of[c], idx_of[c])].max() if idx_of[c].size > 1 else 0.0) for c in uniq
    )
    if max_diam == 0.0:
        di = np.inf
        degenerate = True
    else:
        di = float(min_sep / max_diam)

    # modified Dunn: min inter-centroid distance / max mean distance to centroid
    min_centroid_sep = float(cd[np.triu_indices(k, 1)].min())
    max_mean_scatter = float(scatter.max())
    if max_mean_scatter == 0.0:
        mdi = np.inf
        degenerate = True
    else:
        mdi = min_centroid_sep / max_mean_scatter

    return ValidityScores(si=si, chi=float(chi), dbi=dbi, di=float(di), mdi=float(mdi),
                          degenerate=degenerate)
