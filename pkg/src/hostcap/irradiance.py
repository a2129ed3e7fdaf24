"""Daily irradiance library, bootstrap day sampling, and PV power conversion."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .validation import as_float_array, check_random_state, ensure_finite

MAX_IRRADIANCE_WM2 = 1500.0
MIN_LIBRARY_DAYS = 30


@dataclass
class IrradianceLibrary:
    """Complete historical days of global irradiance, W/m², shape (N, T)."""

    days: np.ndarray
    delta_t: float
    dates: list[str] | None = None

    def __post_init__(self):
        self.days = as_float_array(self.days, "days", ndim=2)
        ensure_finite(self.days, "days")
        if self.days.shape[0] < 1:
            raise ValueError("irradiance library is empty")
        if np.any(self.days < 0.0) or np.any(self.days > MAX_IRRADIANCE_WM2):
            raise ValueError(f"irradiance values must lie in [0, {MAX_IRRADIANCE_WM2}] W/m^2")
        if self.dates is not None and len(self.dates) != self.days.shape[0]:
            raise ValueError("one date per day required")
        if self.days.shape[0] < MIN_LIBRARY_DAYS:
            warnings.warn(
                f"irradiance library has only {self.days.shape[0]} days "
                f"(< {MIN_LIBRARY_DAYS}); bootstrap spread will be coarse"
            )

    @property
    def n_days(self) -> int:
        return self.days.shape[0]


def segment_daily(timestamps, values, delta_t: float) -> tuple[IrradianceLibrary, int]:
    """Cut a timestamped series into complete days.

    Days with missing or surplus samples (gaps, partial edges) are dropped;
    the second return value counts the dropped samples.
    """
    values = as_float_array(values, "irradiance", ndim=1)
    if len(timestamps) != values.size:
        raise ValueError("timestamps and values must align")
    steps_per_day = 1440.0 / delta_t
    if abs(steps_per_day - round(steps_per_day)) > 1e-9:
        raise ValueError(f"delta_t={delta_t} does not divide a day evenly")
    T = int(round(steps_per_day))

    by_day: dict[str, list[tuple[int, float]]] = {}
    order: list[str] = []
    for ts, v in zip(timestamps, values):
        if isinstance(ts, str):
            ts = datetime.fromisoformat(ts)
        slot = int((ts.hour * 60 + ts.minute) / delta_t)
        key = ts.date().isoformat()
        if key not in by_day:
            order.append(key)
            by_day[key] = []
        by_day[key].append((slot, float(v)))

    days, dates = [], []
    dropped = 0
    for key in order:
        entries = by_day[key]
        slots = {s for s, _ in entries}
        if len(entries) == T and slots == set(range(T)):
            day = np.empty(T)
            for s, v in entries:
                day[s] = v
            days.append(day)
            dates.append(key)
        else:
            dropped += len(entries)
    if not days:
        raise ValueError("no complete day found in the irradiance series")
    return IrradianceLibrary(days=np.vstack(days), delta_t=delta_t, dates=dates), dropped


def read_irradiance_csv(path) -> tuple[list[datetime], np.ndarray]:
    """Read a ``timestamp,ghi_wm2`` CSV with ISO-8601 timestamps."""
    path = Path(path)
    stamps: list[datetime] = []
    vals: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header != ["timestamp", "ghi_wm2"]:
            raise ValueError(f"{path}: expected header timestamp,ghi_wm2")
        for row in reader:
            if not row:
                continue
            stamps.append(datetime.fromisoformat(row[0]))
            vals.append(float(row[1]))
    return stamps, np.array(vals)


def bootstrap_days(library: IrradianceLibrary, n_draws: int, random_state,
                   month: int | None = None) -> np.ndarray:
    """Indices of days drawn uniformly with replacement.

    ``month`` restricts the pool to days from that calendar month
    (seasonal stratification; off unless requested).
    """
    rng = check_random_state(random_state)
    if month is None:
        pool = np.arange(library.n_days)
    else:
        if library.dates is None:
            raise ValueError("library has no dates; cannot stratify by month")
        pool = np.array([i for i, d in enumerate(library.dates)
                         if datetime.fromisoformat(d).month == month])
        if pool.size == 0:
            raise ValueError(f"no library days in month {month}")
    return pool[rng.integers(0, pool.size, size=n_draws)]


def save_library_csv(path, library: IrradianceLibrary) -> None:
    """Persist the library as a days x T matrix (``date,t1..tT``)."""
    T = library.days.shape[1]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + [f"t{i + 1}" for i in range(T)])
        for i in range(library.n_days):
            date = library.dates[i] if library.dates else f"day{i + 1}"
            writer.writerow([date] + [repr(float(v)) for v in library.days[i]])


def load_library_csv(path, delta_t: float) -> IrradianceLibrary:
    path = Path(path)
    days, dates = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if not header or header[0] != "date":
            raise ValueError(f"{path}: expected header date,t1..tT")
        for row in reader:
            if not row:
                continue
            dates.append(row[0])
            days.append([float(x) for x in row[1:]])
    if not days:
        raise ValueError(f"{path}: empty irradiance library")
    return IrradianceLibrary(days=np.array(days), delta_t=delta_t, dates=dates)


def pv_power(irradiance_wm2, capacity_kwp: float, g_stc: float = 1000.0) -> np.ndarray:
    """PV active power (kW): linear in irradiance, clipped at rated capacity."""
    if capacity_kwp < 0:
        raise ValueError("PV capacity must be >= 0")
    g = as_float_array(irradiance_wm2, "irradiance")
    ensure_finite(g, "irradiance")
    if np.any(g < 0):
        raise ValueError("irradiance must be >= 0")
    return capacity_kwp * np.minimum(g / g_stc, 1.0)
