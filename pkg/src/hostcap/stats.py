"""Shared numeric primitives: empirical percentiles over scenario samples."""

from __future__ import annotations

import math

import numpy as np


def percentile(values, q: float) -> float:
    """Linear-interpolation percentile between closest ranks.

    Uses the continuous rank ``h = (n - 1) * q / 100`` on the sorted sample
    and interpolates between the two bracketing order statistics, so the
    result is continuous in ``q`` (``q=0`` is the minimum, ``q=100`` the
    maximum).
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite sample")
    if not 0.0 <= q <= 100.0:
        raise ValueError(f"percentile q must be in [0, 100], got {q}")
    s = np.sort(v)
    h = (s.size - 1) * (q / 100.0)
    lo = math.floor(h)
    hi = min(lo + 1, s.size - 1)
    return float(s[lo] + (h - lo) * (s[hi] - s[lo]))
