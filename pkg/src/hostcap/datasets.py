"""Synthetic demo datasets: load profile corpus, irradiance history, demo feeder.

These generators back the shipped end-to-end fixture: three consumption
archetypes at well-separated energy scales (so the cluster sweep finds
k=3 and canonical labels are predictable), and an irradiance history
whose rare very clear days and short full-sun bursts create the
risk-level and duration spreads the planning study examines.
"""

from __future__ import annotations

import csv
import shutil
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .profiles import LoadProfileSet, annual_energy_of, write_profiles_csv
from .rng import RngStream

KW_PER_GWH_YEAR = 1e6 / (365.0 * 24.0)  # mean kW of a 1 GWh/yr consumer

#: nominal annual energies (GWh/yr) per archetype; scale gaps keep raw-kW
#: clustering unambiguous at k=3
GROUP_ENERGIES = {
    "residential": (0.55, 0.65, 0.75, 0.85),
    "commercial": (1.40, 1.55, 1.70, 1.85),
    "industrial": (3.00, 3.25, 3.50, 3.75),
}


def _hours(n_steps: int, delta_t: float) -> np.ndarray:
    return (np.arange(n_steps) + 0.5) * delta_t / 60.0


def _bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-((t - center) / width) ** 2)


def _group_shape(group: str, t: np.ndarray) -> np.ndarray:
    if group == "residential":
        shape = 0.35 + 0.9 * _bump(t, 20.0, 2.2) + 0.35 * _bump(t, 7.5, 1.8)
    elif group == "commercial":
        shape = 0.30 + 0.85 * np.clip(_bump(t, 13.0, 4.5) * 1.2, 0.0, 1.0)
    elif group == "industrial":
        shape = 0.75 + 0.30 * _bump(t, 11.0, 5.0) - 0.18 * _bump(t, 13.0, 1.5)
    else:
        raise ValueError(f"unknown archetype '{group}'")
    return shape / shape.mean()


def make_load_profiles(stream: RngStream, n_days: int = 60,
                       delta_t: float = 15.0) -> LoadProfileSet:
    """Daily kW records for 12 transformers (4 per archetype).

    Each record carries its own realized annualized-energy label, so the
    conditioning signal seen in training matches the profile exactly.
    """
    T = int(round(1440.0 / delta_t))
    t = _hours(T, delta_t)
    profiles, energies, ids = [], [], []
    rho = 0.85
    for group, levels in GROUP_ENERGIES.items():
        shape = _group_shape(group, t)
        for gi, w_nominal in enumerate(levels):
            rng = stream.child("profiles", group, gi).generator()
            mean_kw = w_nominal * KW_PER_GWH_YEAR
            records = np.empty((n_days, T))
            for d in range(n_days):
                level = np.exp(rng.normal(0.0, 0.13))
                noise = np.empty(T)
                noise[0] = rng.normal(0.0, 0.07)
                innov = rng.normal(0.0, 0.07 * np.sqrt(1 - rho ** 2), size=T - 1)
                for i in range(1, T):
                    noise[i] = rho * noise[i - 1] + innov[i - 1]
                records[d] = np.maximum(mean_kw * level * shape * (1.0 + noise), 0.0)
            profiles.append(records)
            energies.append(np.array([annual_energy_of(r, delta_t) for r in records]))
            ids.append(f"{group[:3]}_{gi + 1}")
    return LoadProfileSet(profiles=profiles, annual_energy=energies,
                          transformer_ids=ids, delta_t=delta_t)


def make_irradiance(stream: RngStream, n_days: int = 60, delta_t: float = 15.0,
                    start: str = "2024-04-01") -> tuple[list[str], np.ndarray]:
    """Timestamped GHI series (W/m^2) with clear / broken / overcast days.

    Two very clear days (~3% of the history) carry the extreme tail that
    separates zero-risk from 5%-risk assessments; broken-sky days contain
    short full-sun bursts so 15-minute extremes exceed hourly means.
    """
    T = int(round(1440.0 / delta_t))
    t = _hours(T, delta_t)
    sun = np.clip(np.sin(np.pi * (t - 6.0) / 12.0), 0.0, None) ** 1.3  # daylight 06-18
    rng = stream.child("irradiance").generator()

    n_clear = max(2, round(0.033 * n_days))
    n_broken = round(0.50 * n_days)
    kinds = (["clear"] * n_clear + ["broken"] * n_broken
             + ["overcast"] * (n_days - n_clear - n_broken))
    kinds = list(rng.permutation(kinds))

    series = np.empty((n_days, T))
    for d, kind in enumerate(kinds):
        if kind == "clear":
            peak = rng.uniform(990.0, 1020.0)
            day = peak * sun * (1.0 + rng.normal(0.0, 0.008, T))
        elif kind == "broken":
            base = rng.uniform(480.0, 700.0)
            day = base * sun * (1.0 + rng.normal(0.0, 0.05, T))
            # short near-full-sun bursts, 1-3 steps each; kept below clear-day
            # level so the extreme percentile stays driven by the rare clear days
            for _ in range(rng.integers(2, 6)):
                pos = rng.integers(int(T * 0.35), int(T * 0.65))
                width = rng.integers(1, 4)
                day[pos:pos + width] = rng.uniform(800.0, 880.0) * sun[pos:pos + width]
        else:
            day = rng.uniform(120.0, 380.0) * sun * (1.0 + rng.normal(0.0, 0.08, T))
        series[d] = np.clip(day, 0.0, 1500.0)

    start_dt = datetime.fromisoformat(start)
    stamps = []
    for d in range(n_days):
        for i in range(T):
            stamps.append((start_dt + timedelta(days=d, minutes=i * delta_t)).isoformat(sep=" "))
    return stamps, series.ravel()


def write_irradiance_csv(path, stamps: list[str], values: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "ghi_wm2"])
        for ts, v in zip(stamps, values):
            writer.writerow([ts, repr(float(v))])


def feeder11_dir() -> Path:
    """Directory holding the shipped 11-node demo feeder CSVs."""
    return Path(resources.files("hostcap").joinpath("data/feeder11"))


def write_demo_dataset(out_dir, seed: int = 7, n_days: int = 60,
                       delta_t: float = 15.0) -> dict[str, Path]:
    """Materialize the demo inputs (profiles, irradiance, network) in a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stream = RngStream(seed)

    data = make_load_profiles(stream, n_days=n_days, delta_t=delta_t)
    profiles_csv = out / "profiles.csv"
    write_profiles_csv(profiles_csv, data)

    stamps, values = make_irradiance(stream, n_days=n_days, delta_t=delta_t)
    irradiance_csv = out / "irradiance.csv"
    write_irradiance_csv(irradiance_csv, stamps, values)

    nodes_csv = out / "nodes.csv"
    branches_csv = out / "branches.csv"
    shutil.copyfile(feeder11_dir() / "nodes.csv", nodes_csv)
    shutil.copyfile(feeder11_dir() / "branches.csv", branches_csv)
    return {
        "profiles": profiles_csv,
        "irradiance": irradiance_csv,
        "nodes": nodes_csv,
        "branches": branches_csv,
    }
