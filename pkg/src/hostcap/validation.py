"""Input validation helpers used by estimators and pipeline operations."""

from __future__ import annotations

import numpy as np

from .rng import RngStream


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def ensure_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def ensure_non_negative(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if np.any(np.asarray(arr) < 0):
        raise ValueError(f"{name} contains negative values")
    return arr


def check_profile_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a samples x time matrix of power values (finite, >= 0)."""
    arr = as_float_array(X, name, ndim=2)
    ensure_finite(arr, name)
    ensure_non_negative(arr, name)
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    return arr


def check_random_state(random_state) -> np.random.Generator:
    """Coerce seeds, RngStream objects, and generators to a Generator."""
    if random_state is None:
        return np.random.default_rng()
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, RngStream):
        return random_state.generator()
    if isinstance(random_state, (int, np.integer)):
        return np.random.default_rng(int(random_state))
    raise TypeError(
        "random_state must be None, an int seed, an RngStream, or a numpy Generator"
    )
