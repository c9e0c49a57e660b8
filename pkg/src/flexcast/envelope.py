"""Flexibility-envelope geometry and sustained-duration derivation.

An envelope stores, for every (lead time, power level) pair, how long the
building can hold that power level starting at that lead time without the
cumulative energy leaving the corridor spanned by the energy bounds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Absolute slack (kWh) under which touching a bound still counts as feasible.
CONTACT_TOL = 1e-9


class EnvelopeError(ValueError):
    """Base class for envelope-domain errors."""


class InvalidBoundsError(EnvelopeError):
    pass


class LeadOutOfHorizonError(EnvelopeError):
    pass


class GridMismatchError(EnvelopeError):
    pass


@dataclass(frozen=True)
class PowerGrid:
    p_min: float = -12.0
    p_max: float = 14.0
    step: float = 0.5

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise EnvelopeError(f"p_min ({self.p_min}) must be below p_max ({self.p_max})")
        if self.step <= 0:
            raise EnvelopeError("power step must be positive")
        n = (self.p_max - self.p_min) / self.step
        if abs(n - round(n)) > 1e-9:
            raise EnvelopeError("power range is not an integer multiple of the step")

    @property
    def size(self) -> int:
        return int(round((self.p_max - self.p_min) / self.step)) + 1

    def levels(self) -> np.ndarray:
        return self.p_min + self.step * np.arange(self.size)


def default_lead_offsets() -> tuple[int, ...]:
    """22 lead times over 24 h, coarser further out.

    15-min steps for the first 2 h, 30-min steps up to 6 h, then 3-h steps.
    """
    return (
        tuple(range(0, 120, 15))
        + tuple(range(120, 360, 30))
        + tuple(range(360, 1440, 180))
    )


@dataclass(frozen=True)
class LeadTimeGrid:
    offsets: tuple[int, ...] = field(default_factory=default_lead_offsets)
    horizon: int = 1440

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if not offs or offs[0] != 0:
            raise EnvelopeError("lead offsets must start at 0")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise EnvelopeError("lead offsets must be strictly increasing")
        if offs[-1] > self.horizon:
            raise EnvelopeError("last lead offset exceeds the horizon")

    @property
    def size(self) -> int:
        return len(self.offsets)

    def array(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    def remaining(self) -> np.ndarray:
        """Time left in the horizon at every lead offset (minutes)."""
        return self.horizon - self.array()


@dataclass(frozen=True)
class EnergyBounds:
    """Cumulative-energy corridor relative to the quantification instant.

    ``times`` are minutes from the quantification instant; energies are kWh.
    """

    times: np.ndarray
    e_upper: np.ndarray
    e_lower: np.ndarray
    e_ref: np.ndarray

    def __post_init__(self):
        for name in ("times", "e_upper", "e_lower", "e_ref"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        t = self.times
        if t.ndim != 1 or len(t) < 2:
            raise InvalidBoundsError("bounds need at least two time points")
        if not (len(self.e_upper) == len(self.e_lower) == len(self.e_ref) == len(t)):
            raise InvalidBoundsError("bound arrays differ in length")
        if np.any(np.diff(t) <= 0):
            raise InvalidBoundsError("bound times must be strictly increasing")
        if not np.all(np.isfinite(self.e_upper) & np.isfinite(self.e_lower) & np.isfinite(self.e_ref)):
            raise InvalidBoundsError("bounds contain non-finite values")
        if np.any(self.e_lower > self.e_upper + CONTACT_TOL):
            raise InvalidBoundsError("lower bound exceeds upper bound")

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def at(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        return (
            np.interp(t, self.times, self.e_upper),
            np.interp(t, self.times, self.e_lower),
            np.interp(t, self.times, self.e_ref),
        )

    def contains_reference(self, tol: float = 1e-9) -> bool:
        return bool(
            np.all(self.e_lower <= self.e_ref + tol) and np.all(self.e_ref <= self.e_upper + tol)
        )


@dataclass(frozen=True)
class FlexibilityEnvelope:
    power_grid: PowerGrid
    lead_grid: LeadTimeGrid
    durations: np.ndarray  # [lead, power], minutes
    timestamp: float = 0.0  # quantification instant, minutes since scenario start

    def __post_init__(self):
        d = np.array(self.durations, dtype=float)
        if d.shape != self.shape:
            raise GridMismatchError(f"durations shape {d.shape} != grid shape {self.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "durations", d)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.lead_grid.size, self.power_grid.size)

    @property
    def n_entries(self) -> int:
        return self.lead_grid.size * self.power_grid.size

    def same_grid(self, other: "FlexibilityEnvelope") -> bool:
        return self.power_grid == other.power_grid and self.lead_grid == other.lead_grid

    def check(self, tol: float = 1e-9) -> None:
        """Raise if any duration is negative or outlasts the horizon."""
        cap = self.lead_grid.remaining()[:, None]
        if np.any(self.durations < -tol) or np.any(self.durations > cap + tol):
            raise EnvelopeError("durations outside [0, horizon - lead]")


def _first_crossing(t0, t1, g0, g1):
    """Time in [t0, t1] where the linear function through (t0,g0),(t1,g1) hits zero."""
    frac = g0 / (g0 - g1)
    return t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)


def _durations_at_lead(bounds: EnergyBounds, lead: float, powers: np.ndarray) -> np.ndarray:
    times = bounds.times
    start = times[0] + lead
    later = times > start
    t = np.concatenate(([start], times[later]))
    up, lo, ref = bounds.at(t)
    s = (t - start)[:, None]
    line = ref[0] + powers[None, :] * s / 60.0
    # Feasible where g_up >= 0 and g_lo >= 0. The contact slack only decides
    # feasibility; crossing times use the exact gaps.
    g_up = up[:, None] - line
    g_lo = line - lo[:, None]

    bad = (g_up < -CONTACT_TOL) | (g_lo < -CONTACT_TOL)
    span = t[-1] - start
    out = np.full(len(powers), span)
    if not bad.any():
        return out
    first = np.where(bad.any(axis=0), bad.argmax(axis=0), -1)
    for j in np.flatnonzero(first >= 0):
        k = first[j]
        if k == 0:
            out[j] = 0.0
            continue
        t0, t1 = t[k - 1], t[k]
        cross = t1
        if g_up[k, j] < -CONTACT_TOL:
            cross = min(cross, _first_crossing(t0, t1, g_up[k - 1, j], g_up[k, j]))
        if g_lo[k, j] < -CONTACT_TOL:
            cross = min(cross, _first_crossing(t0, t1, g_lo[k - 1, j], g_lo[k, j]))
        out[j] = cross - start
    return out


def _check_lead(bounds: EnergyBounds, lead: float) -> None:
    if lead < 0 or lead > bounds.horizon + 1e-9:
        raise LeadOutOfHorizonError(f"lead {lead} min outside [0, {bounds.horizon}]")


def derive_sustained_duration(bounds: EnergyBounds, lead: float, power: float) -> float:
    """Longest time (minutes) ``power`` kW can be held from ``lead`` inside the corridor.

    The held trajectory starts at the reference energy at ``lead`` and the
    corridor is linear between bound samples, so the exit time is the first
    segment-wise root of a linear function.
    """
    _check_lead(bounds, lead)
    return float(_durations_at_lead(bounds, float(lead), np.array([float(power)]))[0])


def build_envelope(
    bounds: EnergyBounds,
    power_grid: PowerGrid | None = None,
    lead_grid: LeadTimeGrid | None = None,
    timestamp: float = 0.0,
) -> FlexibilityEnvelope:
    power_grid = power_grid or PowerGrid()
    lead_grid = lead_grid or LeadTimeGrid()
    if lead_grid.horizon > bounds.horizon + 1e-9:
        raise InvalidBoundsError(
            f"bounds cover {bounds.horizon} min, envelope horizon is {lead_grid.horizon} min"
        )
    powers = power_grid.levels()
    rows = []
    for lead in lead_grid.offsets:
        _check_lead(bounds, lead)
        d = _durations_at_lead(bounds, float(lead), powers)
        rows.append(np.minimum(d, lead_grid.horizon - lead))
    return FlexibilityEnvelope(power_grid, lead_grid, np.vstack(rows), timestamp)


def envelope_delta(a: FlexibilityEnvelope, b: FlexibilityEnvelope) -> np.ndarray:
    if not a.same_grid(b):
        raise GridMismatchError("envelopes are defined on different grids")
    return a.durations - b.durations


# --- CSV -----------------------------------------------------------------

CSV_HEADER = ("lead_min", "p_kw", "duration_min")


def envelope_to_csv(env: FlexibilityEnvelope) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    levels = env.power_grid.levels()
    for i, lead in enumerate(env.lead_grid.offsets):
        for j, p in enumerate(levels):
            w.writerow((lead, f"{p:g}", f"{env.durations[i, j]:.3f}"))
    return buf.getvalue()


def envelope_from_csv(text: str, horizon: int = 1440, timestamp: float = 0.0) -> FlexibilityEnvelope:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise EnvelopeError("not an envelope CSV (bad header)")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    leads = np.unique(data[:, 0])
    powers = np.unique(data[:, 1])
    step = float(np.round(np.min(np.diff(powers)), 9)) if len(powers) > 1 else 1.0
    pg = PowerGrid(float(powers[0]), float(powers[-1]), step)
    lg = LeadTimeGrid(tuple(int(x) for x in leads), horizon)
    if len(data) != pg.size * lg.size:
        raise EnvelopeError("envelope CSV is not a full grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    d = data[order, 2].reshape(lg.size, pg.size)
    return FlexibilityEnvelope(pg, lg, d, timestamp)


def write_envelope_csv(env: FlexibilityEnvelope, path) -> None:
    from flexcast.io import atomic_write_text

    atomic_write_text(Path(path), envelope_to_csv(env))


def read_envelope_csv(path, horizon: int = 1440) -> FlexibilityEnvelope:
    return envelope_from_csv(Path(path).read_text(), horizon=horizon)
