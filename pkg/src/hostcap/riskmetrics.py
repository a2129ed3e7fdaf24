"""Duration-constrained voltage statistics and intensity/duration/frequency risk metrics.

For a scenario's node x time voltage slice, the overvoltage statistic is
the largest moving-window mean (window length tau) of the per-time-step
node-wise maximum; the undervoltage statistic is the min/mean/min mirror.
Reductions over the scenario axis then give frequency (share of violating
scenarios, strict inequality), intensity (percentile of the statistic),
representative duration (largest window still violating at a percentile,
non-strict), operating-region classes, and hosting capacity along the PV
growth axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stats import percentile

DEFAULT_DURATIONS_MIN = (15.0, 30.0, 60.0, 120.0, 240.0, 360.0, 720.0, 1440.0)

REGION_SAFE = "safe"
REGION_CAUTION = "caution"
REGION_OVER = "overvoltage"
REGION_UNDER = "undervoltage"
REGION_BOTH = "both"


@dataclass(frozen=True)
class VoltageLimits:
    v_max: float = 1.05
    v_caution: float = 1.047
    v_min: float = 0.94

    def __post_init__(self):
        if not self.v_min < self.v_caution < self.v_max:
            raise ValueError("limits must satisfy v_min < v_caution < v_max")


@dataclass(frozen=True)
class DurationGrid:
    """Window lengths (minutes) evaluated against a delta_t-sampled day."""

    delta_t_min: float = 15.0
    durations_min: tuple[float, ...] = DEFAULT_DURATIONS_MIN

    def __post_init__(self):
        if self.delta_t_min <= 0:
            raise ValueError("delta_t must be positive")
        for tau in self.durations_min:
            window_steps(tau, self.delta_t_min)
        object.__setattr__(self, "durations_min", tuple(float(t) for t in self.durations_min))

    def steps(self, tau_min: float) -> int:
        return window_steps(tau_min, self.delta_t_min)

    def for_horizon(self, n_steps: int) -> tuple[float, ...]:
        return tuple(t for t in self.durations_min if self.steps(t) <= n_steps)


def window_steps(tau_min: float, delta_t_min: float) -> int:
    ratio = tau_min / delta_t_min
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9:
        raise ValueError(f"duration {tau_min} min is not a positive multiple of delta_t={delta_t_min}")
    return int(n)


def _window_means(series: np.ndarray, n_steps: int) -> np.ndarray:
    """Means of all length-n windows along the last axis (no wraparound)."""
    T = series.shape[-1]
    if n_steps > T:
        raise ValueError(f"window of {n_steps} steps exceeds horizon {T}")
    view = np.lib.stride_tricks.sliding_window_view(series, n_steps, axis=-1)
    return view.mean(axis=-1)


def sustained_overvoltage(v_slice, tau_min: float, delta_t_min: float) -> float:
    """Worst sustained high voltage: max over windows of mean nodewise max."""
    v = np.asarray(v_slice, dtype=float)
    if v.ndim != 2:
        raise ValueError("expected a (nodes, time) voltage slice")
    n = window_steps(tau_min, delta_t_min)
    return float(_window_means(v.max(axis=0), n).max())


def sustained_undervoltage(v_slice, tau_min: float, delta_t_min: float) -> float:
    """Worst sustained low voltage: min over windows of mean nodewise min."""
    v = np.asarray(v_slice, dtype=float)
    if v.ndim != 2:
        raise ValueError("expected a (nodes, time) voltage slice")
    n = window_steps(tau_min, delta_t_min)
    return float(_window_means(v.min(axis=0), n).min())


def sustained_stats(v, tau_min: float, delta_t_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized over scenarios: (over, under) statistics for a (S, B, T) tensor."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 3:
        raise ValueError("expected a (scenarios, nodes, time) voltage tensor")
    n = window_steps(tau_min, delta_t_min)
    over = _window_means(v.max(axis=1), n).max(axis=-1)
    under = _window_means(v.min(axis=1), n).min(axis=-1)
    return over, under


def frequency(stat_values, limit: float, direction: str) -> float:
    """Share of scenarios violating the limit (strict inequality)."""
    vals = np.asarray(stat_values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty sample")
    if direction == "over":
        return float(np.mean(vals > limit))
    if direction == "under":
        return float(np.mean(vals < limit))
    raise ValueError(f"direction must be 'over' or 'under', got '{direction}'")


def intensity(stat_values, q: float) -> float:
    """q-th percentile of the duration-constrained statistic across scenarios."""
    return percentile(stat_values, q)


def representative_duration(stats_by_tau, q: float, limits: VoltageLimits,
                            direction: str, durations_min=None) -> float | None:
    """Largest window length whose q-th percentile still violates (non-strict).

    ``stats_by_tau`` maps duration (minutes) to the per-scenario statistic
    list. Returns None when no window qualifies.
    """
    taus = tuple(durations_min) if durations_min is not None else tuple(sorted(stats_by_tau))
    missing = [t for t in taus if t not in stats_by_tau]
    if missing:
        raise ValueError(f"missing duration data for tau={missing}")
    qualifying = []
    for tau in taus:
        i_q = intensity(stats_by_tau[tau], q)
        if direction == "over" and i_q >= limits.v_max:
            qualifying.append(tau)
        elif direction == "under" and i_q <= limits.v_min:
            qualifying.append(tau)
    return max(qualifying) if qualifying else None


def classify_region(i_over: float, i_under: float, limits: VoltageLimits) -> str:
    """Operating-region class from the over/under intensities at a risk level."""
    over = i_over > limits.v_max
    under = i_under < limits.v_min
    if over and under:
        return REGION_BOTH
    if over:
        return REGION_OVER
    if under:
        return REGION_UNDER
    if i_over > limits.v_caution:
        return REGION_CAUTION
    return REGION_SAFE


@dataclass
class HcResult:
    pv_growth_percent: float | None  # None: violating already at zero growth
    non_monotone: bool = False

    @property
    def value_or_zero(self) -> float:
        return 0.0 if self.pv_growth_percent is None else self.pv_growth_percent


def hosting_capacity_from_curve(pv_levels_percent, intensities, v_max: float) -> HcResult:
    """Largest PV growth with intensity <= v_max, interpolated between grid points.

    A non-monotone intensity curve is flagged and resolved at its first
    upward crossing of the limit.
    """
    g = np.asarray(pv_levels_percent, dtype=float)
    I = np.asarray(intensities, dtype=float)
    if g.shape != I.shape or g.ndim != 1 or g.size < 2:
        raise ValueError("need aligned 1-D growth/intensity arrays with >= 2 points")
    if np.any(np.diff(g) <= 0):
        raise ValueError("PV growth levels must be strictly increasing")
    non_monotone = bool(np.any(np.diff(I) < -1e-12))

    if I[0] > v_max:
        return HcResult(pv_growth_percent=None, non_monotone=non_monotone)
    above = np.flatnonzero(I > v_max)
    if above.size == 0:
        return HcResult(pv_growth_percent=float(g[-1]), non_monotone=non_monotone)
    j = int(above[0])  # first upward crossing
    g0, g1 = g[j - 1], g[j]
    i0, i1 = I[j - 1], I[j]
    hc = g0 + (v_max - i0) * (g1 - g0) / (i1 - i0)
    return HcResult(pv_growth_percent=float(hc), non_monotone=non_monotone)


@dataclass
class RiskSurface:
    """Per-cell, per-duration scenario statistics and their cached reductions.

    ``stat_over``/``stat_under`` have shape (E, P, n_tau, S) with NaN
    padding where scenarios were excluded (non-converged power flow).
    """

    energy_levels_percent: np.ndarray
    pv_levels_percent: np.ndarray
    durations_min: tuple[float, ...]
    stat_over: np.ndarray
    stat_under: np.ndarray
    n_excluded: np.ndarray  # (E, P)
    limits: VoltageLimits = field(default_factory=VoltageLimits)

    def __post_init__(self):
        expected = (len(self.energy_levels_percent), len(self.pv_levels_percent),
                    len(self.durations_min))
        if self.stat_over.shape[:3] != expected or self.stat_under.shape[:3] != expected:
            raise ValueError("statistic tensors do not match the grid layout")

    def _tau_index(self, tau_min: float) -> int:
        try:
            return self.durations_min.index(float(tau_min))
        except ValueError:
            raise ValueError(f"duration {tau_min} min not in surface grid") from None

    def stat_values(self, ie: int, ip: int, tau_min: float, direction: str) -> np.ndarray:
        tensor = self.stat_over if direction == "over" else self.stat_under
        vals = tensor[ie, ip, self._tau_index(tau_min)]
        return vals[np.isfinite(vals)]

    def intensity(self, ie: int, ip: int, tau_min: float, q: float, direction: str) -> float:
        return intensity(self.stat_values(ie, ip, tau_min, direction), q)

    def frequency(self, ie: int, ip: int, tau_min: float, direction: str) -> float:
        limit = self.limits.v_max if direction == "over" else self.limits.v_min
        return frequency(self.stat_values(ie, ip, tau_min, direction), limit, direction)

    def region(self, ie: int, ip: int, risk_percent: float, tau_min: float) -> str:
        i_over = self.intensity(ie, ip, tau_min, 100.0 - risk_percent, "over")
        i_under = self.intensity(ie, ip, tau_min, risk_percent, "under")
        return classify_region(i_over, i_under, self.limits)

    def representative_duration(self, ie: int, ip: int, q: float, direction: str) -> float | None:
        stats_by_tau = {tau: self.stat_values(ie, ip, tau, direction)
                        for tau in self.durations_min}
        return representative_duration(stats_by_tau, q, self.limits, direction,
                                       self.durations_min)

    def hosting_capacity(self, ie: int, risk_percent: float, tau_min: float) -> HcResult:
        """HC along the PV axis at one energy step, risk level, and duration."""
        q = 100.0 - risk_percent
        curve = np.array([
            self.intensity(ie, ip, tau_min, q, "over")
            for ip in range(len(self.pv_levels_percent))
        ])
        return hosting_capacity_from_curve(self.pv_levels_percent, curve, self.limits.v_max)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        np.savez(
            path,
            energy_levels=self.energy_levels_percent,
            pv_levels=self.pv_levels_percent,
            durations_min=np.array(self.durations_min),
            stat_over=self.stat_over,
            stat_under=self.stat_under,
            n_excluded=self.n_excluded,
            limits=np.array([self.limits.v_max, self.limits.v_caution, self.limits.v_min]),
        )

    @classmethod
    def load(cls, path) -> "RiskSurface":
        with np.load(path) as data:
            limits = VoltageLimits(v_max=float(data["limits"][0]),
                                   v_caution=float(data["limits"][1]),
                                   v_min=float(data["limits"][2]))
            return cls(
                energy_levels_percent=data["energy_levels"],
                pv_levels_percent=data["pv_levels"],
                durations_min=tuple(float(t) for t in data["durations_min"]),
                stat_over=data["stat_over"],
                stat_under=data["stat_under"],
                n_excluded=data["n_excluded"],
                limits=limits,
            )
