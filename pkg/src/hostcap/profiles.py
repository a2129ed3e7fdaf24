"""Daily load profile data model, energy accounting, and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_float_array, ensure_finite, ensure_non_negative

MINUTES_PER_DAY = 1440.0
HOURS_PER_YEAR_FACTOR = 365.0  # planning-label convention: no leap years


def annual_energy_of(profile, delta_t: float) -> float:
    """Annualized energy of one daily profile, in GWh/year.

    ``365 * sum(P_t) * (delta_t / 60) / 1e6`` with ``P_t`` in kW and
    ``delta_t`` in minutes.
    """
    p = as_float_array(profile, "profile", ndim=1)
    ensure_finite(p, "profile")
    ensure_non_negative(p, "profile")
    daily_kwh = float(np.sum(p)) * (delta_t / 60.0)
    return HOURS_PER_YEAR_FACTOR * daily_kwh / 1e6


def reactive_from_active(p, power_factor: float) -> np.ndarray:
    """Reactive power (kvar) from active power (kW) at a constant power factor."""
    if not 0.0 < power_factor <= 1.0:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")
    arr = as_float_array(p, "active power")
    return arr * math.tan(math.acos(power_factor))


def _check_whole_day(n_steps: int, delta_t: float) -> None:
    span = n_steps * delta_t
    if span <= 0 or abs(span - round(span)) > 1e-9 or MINUTES_PER_DAY % round(span) != 0:
        raise ValueError(
            f"profile span {span} min (T={n_steps}, delta_t={delta_t}) does not divide a day"
        )


@dataclass
class LoadProfileSet:
    """Per-transformer daily active-power records with annual-energy labels.

    ``profiles[m]`` is an ``(N_m, T)`` array of kW values for transformer
    ``m``; ``annual_energy[m]`` holds the matching ``(N_m,)`` GWh/year
    labels used to condition the generative model.
    """

    profiles: list[np.ndarray]
    annual_energy: list[np.ndarray]
    transformer_ids: list[str]
    delta_t: float = 15.0

    def __post_init__(self):
        if len(self.profiles) < 1:
            raise ValueError("need at least one transformer")
        if not (len(self.profiles) == len(self.annual_energy) == len(self.transformer_ids)):
            raise ValueError("profiles, annual_energy and transformer_ids must align")
        n_steps = None
        for tid, recs, labels in zip(self.transformer_ids, self.profiles, self.annual_energy):
            recs = np.asarray(recs, dtype=float)
            labels = np.asarray(labels, dtype=float)
            if recs.ndim != 2 or recs.shape[0] < 1:
                raise ValueError(f"transformer {tid}: records must be a non-empty (N, T) array")
            if n_steps is None:
                n_steps = recs.shape[1]
            elif recs.shape[1] != n_steps:
                raise ValueError(f"transformer {tid}: inconsistent profile length")
            if labels.shape != (recs.shape[0],):
                raise ValueError(f"transformer {tid}: one energy label per record required")
            ensure_finite(recs, f"transformer {tid} profiles")
            ensure_non_negative(recs, f"transformer {tid} profiles")
            if np.any(labels <= 0) or not np.all(np.isfinite(labels)):
                raise ValueError(f"transformer {tid}: annual energy labels must be finite and > 0")
        _check_whole_day(n_steps, self.delta_t)
        self.profiles = [np.asarray(p, dtype=float) for p in self.profiles]
        self.annual_energy = [np.asarray(w, dtype=float) for w in self.annual_energy]

    @property
    def n_transformers(self) -> int:
        return len(self.profiles)

    @property
    def n_steps(self) -> int:
        return self.profiles[0].shape[1]

    def record_counts(self) -> list[int]:
        return [p.shape[0] for p in self.profiles]

    def training_pairs(self, transformer_indices) -> tuple[np.ndarray, np.ndarray]:
        """Stack (profile, label) records of the given transformers."""
        idx = list(transformer_indices)
        if not idx:
            raise ValueError("no transformers selected")
        P = np.vstack([self.profiles[m] for m in idx])
        w = np.concatenate([self.annual_energy[m] for m in idx])
        return P, w


def read_profiles_csv(path, delta_t: float = 15.0) -> LoadProfileSet:
    """Load a ``transformer_id,date,t1..tT[,annual_energy_gwh]`` CSV.

    Records are grouped by transformer in file order. When the optional
    energy column is absent the label is computed from the profile itself.
    """
    path = Path(path)
    order: list[str] = []
    recs: dict[str, list[np.ndarray]] = {}
    labels: dict[str, list[float]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if not header or header[0] != "transformer_id" or header[1] != "date":
            raise ValueError(f"{path}: expected header transformer_id,date,t1..tT[,annual_energy_gwh]")
        has_energy = header[-1] == "annual_energy_gwh"
        n_steps = len(header) - 2 - (1 if has_energy else 0)
        if n_steps < 1:
            raise ValueError(f"{path}: no time-step columns found")
        for row in reader:
            if not row:
                continue
            tid = row[0]
            values = np.array([float(x) for x in row[2:2 + n_steps]])
            if tid not in recs:
                order.append(tid)
                recs[tid] = []
                labels[tid] = []
            recs[tid].append(values)
            if has_energy:
                labels[tid].append(float(row[2 + n_steps]))
            else:
                labels[tid].append(annual_energy_of(values, delta_t))
    if not order:
        raise ValueError(f"{path}: no profile records")
    return LoadProfileSet(
        profiles=[np.vstack(recs[t]) for t in order],
        annual_energy=[np.array(labels[t]) for t in order],
        transformer_ids=order,
        delta_t=delta_t,
    )


def write_profiles_csv(path, data: LoadProfileSet, dates: dict[str, list[str]] | None = None) -> None:
    path = Path(path)
    T = data.n_steps
    header = ["transformer_id", "date"] + [f"t{i + 1}" for i in range(T)] + ["annual_energy_gwh"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for m, tid in enumerate(data.transformer_ids):
            day_labels = dates[tid] if dates else [f"day{n + 1}" for n in range(data.profiles[m].shape[0])]
            for n, rec in enumerate(data.profiles[m]):
                writer.writerow([tid, day_labels[n]] + [repr(float(v)) for v in rec]
                                + [repr(float(data.annual_energy[m][n]))])
