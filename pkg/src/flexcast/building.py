"""Synthetic residential building scenarios and extremal-dispatch energy bounds.

Every flexible component is reduced to an energy store with per-step power
limits and an affine per-step standing loss:

    e[k+1] = e[k] - (a[k] * e[k] + b[k]) + p[k] * dt_h,   0 <= e <= capacity

Thermal stores map their comfort band onto [0, capacity] through the
kWh-per-degree gain. Batteries and EVs have a = 0; an EV's ``b`` is the
driving consumption while it is away.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from flexcast.envelope import (
    EnergyBounds,
    FlexibilityEnvelope,
    LeadTimeGrid,
    PowerGrid,
    build_envelope,
)

STEP_MIN = 15
STEPS_PER_DAY = 1440 // STEP_MIN
DT_H = STEP_MIN / 60.0

STORAGE_KINDS = ("battery", "ev", "space_heating", "dhw_tank")
THERMAL_KINDS = ("space_heating", "dhw_tank")
KINDS = STORAGE_KINDS + ("pv", "nonflex_load")

WATER_KWH_PER_L_K = 4.186 / 3600.0
COLD_WATER_C = 10.0
INDOOR_C = 20.0

FEATURE_NAMES = (
    "tod_sin",
    "tod_cos",
    "irradiance",
    "outdoor_temp",
    "presence",
    "nonflex_load",
    "water_draw",
    "room_temp_min",
    "room_temp_max",
    "dhw_temp_min",
    "dhw_temp_max",
    "battery_energy",
    "ev_energy",
    "pv_energy",
    "room_temp",
    "dhw_temp",
)


class ScenarioError(ValueError):
    pass


class InvalidScenarioError(ScenarioError):
    pass


class OutOfSpanError(ScenarioError):
    pass


@dataclass(frozen=True)
class ComponentSpec:
    """One physical component of the building.

    ``initial_state`` is kWh for battery/ev and degrees C for thermal kinds.
    For pv, ``capacity`` is the peak power in kWp.
    """

    kind: str
    name: str = ""
    p_max_charge: float = 0.0
    p_max_discharge: float = 0.0
    capacity: float = 0.0
    initial_state: float = 0.0
    comfort_band: tuple[float, float] | None = None
    thermal_params: tuple[float, float] | None = None  # (loss coefficient 1/h, kWh per degC)
    availability: np.ndarray | None = None  # ev only, one flag per step
    drain: np.ndarray | None = None  # ev only, kWh consumed per step while away

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidScenarioError(f"unknown component kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)
        for attr in ("availability", "drain"):
            v = getattr(self, attr)
            if v is not None:
                arr = np.array(v, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, attr, arr)
        if self.p_max_charge < 0 or self.p_max_discharge < 0:
            raise InvalidScenarioError(f"{self.name}: power limits must be non-negative")
        if self.kind in THERMAL_KINDS:
            if self.comfort_band is None or self.thermal_params is None:
                raise InvalidScenarioError(f"{self.name}: thermal components need a band and params")
            lo, hi = self.comfort_band
            if lo >= hi:
                raise InvalidScenarioError(f"{self.name}: comfort band min {lo} >= max {hi}")
            if self.thermal_params[1] <= 0:
                raise InvalidScenarioError(f"{self.name}: thermal gain must be positive")
            if not lo <= self.initial_state <= hi:
                raise InvalidScenarioError(f"{self.name}: initial temperature outside comfort band")
        elif self.kind in ("battery", "ev"):
            if self.capacity <= 0:
                raise InvalidScenarioError(f"{self.name}: capacity must be positive")
            if not 0 <= self.initial_state <= self.capacity:
                raise InvalidScenarioError(f"{self.name}: initial state outside [0, capacity]")

    @property
    def is_storage(self) -> bool:
        return self.kind in STORAGE_KINDS

    @property
    def storage_capacity(self) -> float:
        """Usable energy range in kWh (thermal: comfort band times gain)."""
        if self.kind in THERMAL_KINDS:
            lo, hi = self.comfort_band
            return (hi - lo) * self.thermal_params[1]
        return self.capacity

    @property
    def initial_energy(self) -> float:
        if self.kind in THERMAL_KINDS:
            return (self.initial_state - self.comfort_band[0]) * self.thermal_params[1]
        return self.initial_state

    def temperature(self, energy):
        lo, _ = self.comfort_band
        return lo + np.asarray(energy) / self.thermal_params[1]


@dataclass(frozen=True)
class BuildingScenario:
    """Components plus exogenous series at 15-min resolution.

    Series cover ``days`` of quantification ticks plus one extra horizon of
    look-ahead so every tick has a full forecast window.
    """

    components: tuple[ComponentSpec, ...]
    irradiance: np.ndarray  # W/m2
    temperature: np.ndarray  # degC
    presence: np.ndarray  # 0/1
    nonflex_load: np.ndarray  # kW
    water_draw: np.ndarray  # L/min
    days: int = 1
    horizon: int = 1440
    seed: int = 0
    start_weekday: int = 0  # 0 = Monday
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for name in ("irradiance", "temperature", "presence", "nonflex_load", "water_draw"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.n_steps
        if self.days < 1:
            raise InvalidScenarioError("scenario needs at least one day")
        for name in ("irradiance", "temperature", "presence", "nonflex_load", "water_draw"):
            if len(getattr(self, name)) != n:
                raise InvalidScenarioError(f"series {name} has {len(getattr(self, name))} steps, need {n}")
        if np.any(self.irradiance < 0) or np.any(self.water_draw < 0):
            raise InvalidScenarioError("irradiance and water draw must be non-negative")
        for c in self.components:
            for arr in (c.availability, c.drain):
                if arr is not None and len(arr) != n:
                    raise InvalidScenarioError(f"{c.name}: series length {len(arr)} != {n}")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise InvalidScenarioError("component names must be unique")

    @property
    def span(self) -> int:
        """Minutes in which quantification ticks may fall."""
        return self.days * 1440

    @property
    def horizon_steps(self) -> int:
        return self.horizon // STEP_MIN

    @property
    def n_steps(self) -> int:
        return self.days * STEPS_PER_DAY + self.horizon // STEP_MIN

    def component(self, kind: str) -> ComponentSpec | None:
        for c in self.components:
            if c.kind == kind:
                return c
        return None

    def is_weekend(self, t0: float) -> bool:
        return (self.start_weekday + int(t0 // 1440)) % 7 >= 5

    def pv_power(self) -> np.ndarray:
        total = np.zeros(self.n_steps)
        for c in self.components:
            if c.kind == "pv":
                total += c.capacity * self.irradiance / 1000.0
        return total

    def base_power(self) -> np.ndarray:
        """Net non-dispatchable import (kW): load minus PV."""
        load = self.nonflex_load if any(c.kind == "nonflex_load" for c in self.components) else 0.0
        return load - self.pv_power()

    def reference_energies(self) -> dict[str, np.ndarray]:
        """Stored energy of every storage component under the reference schedule."""
        if "ref" not in self._cache:
            out = {}
            for c in self.components:
                if c.is_storage:
                    a, b, pch, pdis = _store_dynamics(self, c, 0, self.n_steps)
                    e, _ = _dispatch(c.initial_energy, c.storage_capacity, a, b, pch, pdis, _ref_mode(c))
                    out[c.name] = e
            self._cache["ref"] = out
        return self._cache["ref"]

    def tick(self, t0: float) -> int:
        if t0 < 0 or t0 >= self.span or t0 % STEP_MIN:
            raise OutOfSpanError(f"instant {t0} min is not a tick inside [0, {self.span})")
        return int(t0) // STEP_MIN


# --- per-component dynamics -----------------------------------------------


def _store_dynamics(s: BuildingScenario, c: ComponentSpec, k0: int, k1: int):
    """Affine loss coefficients and power limits for steps [k0, k1)."""
    n = k1 - k0
    a = np.zeros(n)
    b = np.zeros(n)
    pch = np.full(n, c.p_max_charge, dtype=float)
    pdis = np.full(n, c.p_max_discharge, dtype=float)
    if c.kind in THERMAL_KINDS:
        loss, gain = c.thermal_params
        t_min = c.comfort_band[0]
        ambient = s.temperature[k0:k1] if c.kind == "space_heating" else np.full(n, INDOOR_C)
        # standing loss gain*loss*(T - ambient)*dt with T = t_min + e/gain
        a += loss * DT_H
        b += gain * loss * DT_H * (t_min - ambient)
        if c.kind == "dhw_tank":
            litres = s.water_draw[k0:k1] * STEP_MIN
            a += litres * WATER_KWH_PER_L_K / gain
            b += litres * WATER_KWH_PER_L_K * (t_min - COLD_WATER_C)
    elif c.kind == "ev":
        if c.availability is not None:
            avail = c.availability[k0:k1] > 0.5
            pch = np.where(avail, pch, 0.0)
            pdis = np.where(avail, pdis, 0.0)
        if c.drain is not None:
            b += c.drain[k0:k1]
    return a, b, pch, pdis


def _ref_mode(c: ComponentSpec) -> str:
    if c.kind == "battery":
        return "idle"
    if c.kind in THERMAL_KINDS:
        return "mid"
    return "max"  # ev charges as soon as it is plugged in


def _dispatch(e0, cap, a, b, pch, pdis, mode):
    """Greedy per-step dispatch of one store.

    mode: 'max' charges as much as limits allow, 'min' imports as little as
    possible, 'idle' holds p = 0 and 'mid' tracks the middle of the band.
    Returns (energy trajectory of length n+1, power per step).
    """
    n = len(a)
    e = np.empty(n + 1)
    p = np.empty(n)
    e[0] = e0
    for k in range(n):
        after = e[k] - (a[k] * e[k] + b[k])
        lo = max(-pdis[k], -after / DT_H)  # stay above empty
        hi = min(pch[k], (cap - after) / DT_H)  # stay below full
        if mode == "max":
            pk = hi
        elif mode == "min":
            pk = lo
        elif mode == "idle":
            pk = 0.0
        else:
            pk = (0.5 * cap - after) / DT_H
        pk = min(max(pk, lo), hi) if lo <= hi else min(max(pk, -pdis[k]), pch[k])
        p[k] = pk
        # out-of-band states only arise when the limits cannot hold the band
        e[k + 1] = min(max(after + pk * DT_H, 0.0), cap)
    return e, p


def extremal_bounds(s: BuildingScenario, t0: float, horizon: int | None = None) -> EnergyBounds:
    """Upper/lower/reference cumulative grid import from ``t0`` over the horizon."""
    for c in s.components:
        if c.comfort_band is not None and c.comfort_band[0] > c.comfort_band[1]:
            raise InvalidScenarioError(f"{c.name}: infeasible comfort band")
    horizon = s.horizon if horizon is None else horizon
    k0 = s.tick(t0)
    n = horizon // STEP_MIN
    k1 = k0 + n
    if k1 > s.n_steps:
        raise OutOfSpanError(f"horizon from {t0} min runs past the scenario data")
    ref_e = s.reference_energies()
    base = s.base_power()[k0:k1]
    up = base.copy()
    lo = base.copy()
    ref = base.copy()
    for c in s.components:
        if not c.is_storage:
            continue
        a, b, pch, pdis = _store_dynamics(s, c, k0, k1)
        e_start = ref_e[c.name][k0]
        cap = c.storage_capacity
        up += _dispatch(e_start, cap, a, b, pch, pdis, "max")[1]
        lo += _dispatch(e_start, cap, a, b, pch, pdis, "min")[1]
        ref += _dispatch(e_start, cap, a, b, pch, pdis, _ref_mode(c))[1]
    cum = lambda p: np.concatenate(([0.0], np.cumsum(p * DT_H)))  # noqa: E731
    bounds = EnergyBounds(np.arange(n + 1) * float(STEP_MIN), cum(up), cum(lo), cum(ref))
    assert bounds.contains_reference(1e-7), "reference schedule left the corridor"
    return bounds


# --- features -------------------------------------------------------------


def extract_features(s: BuildingScenario, t0: float) -> np.ndarray:
    """16 prediction inputs at tick ``t0`` (order in FEATURE_NAMES)."""
    k = s.tick(t0)
    tod = 2 * math.pi * ((t0 % 1440) / 1440.0)
    ref_e = s.reference_energies()

    def state(kind):
        c = s.component(kind)
        return (c, ref_e[c.name][k]) if c is not None else (None, 0.0)

    sh, e_sh = state("space_heating")
    dhw, e_dhw = state("dhw_tank")
    _, e_bat = state("battery")
    _, e_ev = state("ev")
    room_band = sh.comfort_band if sh else (0.0, 0.0)
    dhw_band = dhw.comfort_band if dhw else (0.0, 0.0)
    return np.array(
        [
            math.sin(tod),
            math.cos(tod),
            s.irradiance[k],
            s.temperature[k],
            s.presence[k],
            s.nonflex_load[k],
            s.water_draw[k],
            room_band[0],
            room_band[1],
            dhw_band[0],
            dhw_band[1],
            e_bat,
            e_ev,
            s.pv_power()[k] * DT_H,
            float(sh.temperature(e_sh)) if sh else 0.0,
            float(dhw.temperature(e_dhw)) if dhw else 0.0,
        ]
    )


def time_of_day_from_features(features: np.ndarray) -> np.ndarray:
    """Recover minutes-after-midnight from the cyclic encoding columns."""
    f = np.atleast_2d(features)
    ang = np.arctan2(f[:, 0], f[:, 1])
    return np.mod(ang / (2 * math.pi) * 1440.0, 1440.0)


# --- quantification -------------------------------------------------------


@dataclass
class QuantifiedSeries:
    instants: list[float]
    envelopes: list[FlexibilityEnvelope]
    seconds: list[float]

    def __len__(self) -> int:
        return len(self.instants)

    def __iter__(self) -> Iterator[tuple[float, FlexibilityEnvelope]]:
        return iter(zip(self.instants, self.envelopes))


def quantify_tick(s, t0, power_grid=None, lead_grid=None) -> FlexibilityEnvelope:
    lead_grid = lead_grid or LeadTimeGrid(horizon=s.horizon)
    bounds = extremal_bounds(s, t0, lead_grid.horizon)
    return build_envelope(bounds, power_grid or PowerGrid(), lead_grid, timestamp=t0)


def _quantify_chunk(args):
    s, ticks, pg, lg = args
    out = []
    for t0 in ticks:
        start = time.perf_counter()
        env = quantify_tick(s, t0, pg, lg)
        out.append((t0, env, time.perf_counter() - start))
    return out


def quantify_series(
    s: BuildingScenario,
    cadence: int = STEP_MIN,
    power_grid: PowerGrid | None = None,
    lead_grid: LeadTimeGrid | None = None,
    include_weekends: bool = False,
    jobs: int = 1,
) -> QuantifiedSeries:
    """One envelope per cadence tick over the scenario span, with timings."""
    if cadence <= 0 or cadence % STEP_MIN or s.span % cadence:
        raise ScenarioError(f"cadence {cadence} min must be a multiple of {STEP_MIN} dividing the span")
    power_grid = power_grid or PowerGrid()
    lead_grid = lead_grid or LeadTimeGrid(horizon=s.horizon)
    ticks = [float(t) for t in range(0, s.span, cadence) if include_weekends or not s.is_weekend(t)]
    s.reference_energies()
    if jobs > 1 and len(ticks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [ticks[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = [r for part in ex.map(_quantify_chunk, [(s, c, power_grid, lead_grid) for c in chunks]) for r in part]
        results.sort(key=lambda r: r[0])
    else:
        results = _quantify_chunk((s, ticks, power_grid, lead_grid))
    return QuantifiedSeries([r[0] for r in results], [r[1] for r in results], [r[2] for r in results])


# --- scenario generation --------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    days: int = 7
    start_weekday: int = 0
    horizon: int = 1440
    # weather
    irradiance_peak: float = 800.0  # W/m2 at solar noon on a clear day
    clearness_spread: float = 0.7  # daily clearness ~ U(1 - spread, 1)
    weather_persistence: float = 0.7  # day-to-day correlation of clearness and temperature offset
    sunrise_h: float = 7.0
    sunset_h: float = 18.0
    temp_mean: float = 5.0
    temp_amplitude: float = 4.0
    temp_day_sigma: float = 3.0
    temp_noise: float = 0.5
    # components
    pv_kwp: float = 7.3
    battery_kw: float = 5.0
    battery_kwh: float = 17.5
    battery_soc0: float = 0.5
    ev_kw: float = 7.0
    ev_kwh: float = 50.0
    ev_soc0: float = 0.5
    ev_trip_kwh: tuple[float, float] = (5.0, 20.0)
    ev_leave_h: tuple[float, float] = (8.0, 0.5)  # mean, std of departure on workdays
    ev_back_h: tuple[float, float] = (17.5, 1.0)
    home_office_prob: float = 0.0  # chance that a workday is spent at home with the car plugged in
    sh_kw: float = 4.0
    sh_band: tuple[float, float] = (20.0, 23.0)
    sh_gain: float = 5.0  # kWh per degC
    sh_loss: float = 0.02  # 1/h
    dhw_kw: float = 5.7
    dhw_band: tuple[float, float] = (45.0, 65.0)
    dhw_litres: float = 300.0
    dhw_loss: float = 0.01
    # behaviour
    base_load_kw: float = 0.3
    water_peak_lpm: float = 1.2
    showers_per_day: float = 1.5  # Poisson mean; each shower is one 15-min step
    shower_litres: tuple[float, float] = (40.0, 80.0)

    def validate(self) -> None:
        if self.days < 1:
            raise InvalidScenarioError(f"days must be >= 1, got {self.days}")
        if self.horizon <= 0 or self.horizon % STEP_MIN:
            raise InvalidScenarioError("horizon must be a positive multiple of 15 min")
        if not 0 <= self.weather_persistence < 1:
            raise InvalidScenarioError("weather_persistence must lie in [0, 1)")
        if not 0 <= self.clearness_spread <= 1:
            raise InvalidScenarioError("clearness_spread must lie in [0, 1]")
        if not self.sunrise_h < self.sunset_h:
            raise InvalidScenarioError("sunrise must precede sunset")
        for name in ("pv_kwp", "battery_kwh", "ev_kwh", "sh_gain", "dhw_litres", "irradiance_peak"):
            if getattr(self, name) <= 0:
                raise InvalidScenarioError(f"{name} must be positive")
        if self.sh_band[0] >= self.sh_band[1] or self.dhw_band[0] >= self.dhw_band[1]:
            raise InvalidScenarioError("comfort band min must be below max")


def solar_shape(hour, sunrise_h: float, sunset_h: float):
    """Clear-sky irradiance profile relative to the noon peak (zero at night)."""
    x = (np.asarray(hour, dtype=float) - sunrise_h) / (sunset_h - sunrise_h)
    return np.where((x > 0) & (x < 1), np.sin(np.pi * np.clip(x, 0, 1)) ** 2, 0.0)


def expected_irradiance(cfg: GeneratorConfig, hour) -> np.ndarray:
    """Mean generated irradiance at ``hour``: peak * shape * E[clearness]."""
    return cfg.irradiance_peak * solar_shape(hour, cfg.sunrise_h, cfg.sunset_h) * (1 - cfg.clearness_spread / 2)


def _bump(hour, centre, width):
    d = (hour - centre + 12) % 24 - 12
    return np.exp(-0.5 * (d / width) ** 2)


def _ar1(rng, n: int, rho: float) -> np.ndarray:
    z = rng.normal(size=n)
    out = np.empty(n)
    out[0] = z[0]
    for i in range(1, n):
        out[i] = rho * out[i - 1] + math.sqrt(1.0 - rho * rho) * z[i]
    return out


def generate_scenario(cfg: GeneratorConfig | None = None, seed: int = 0) -> BuildingScenario:
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_days = cfg.days + math.ceil(cfg.horizon / 1440)
    n = cfg.days * STEPS_PER_DAY + cfg.horizon // STEP_MIN
    hour = (np.arange(n_days * STEPS_PER_DAY) % STEPS_PER_DAY) * STEP_MIN / 60.0
    day = np.arange(n_days * STEPS_PER_DAY) // STEPS_PER_DAY
    weekend = (cfg.start_weekday + day) % 7 >= 5

    # AR(1) latent weather with standard normal marginals; clearness maps it
    # through the normal CDF so its marginal stays U(1 - spread, 1)
    sky = _ar1(rng, n_days, cfg.weather_persistence)
    warm = _ar1(rng, n_days, cfg.weather_persistence)
    u = np.array([0.5 * (1.0 + math.erf(z / math.sqrt(2.0))) for z in sky])
    clearness = 1.0 - cfg.clearness_spread * u
    irr = cfg.irradiance_peak * solar_shape(hour, cfg.sunrise_h, cfg.sunset_h) * clearness[day]

    day_offset = cfg.temp_day_sigma * warm
    noise = np.empty(len(hour))
    z = rng.normal(0.0, cfg.temp_noise, len(hour))
    acc = 0.0
    for i in range(len(hour)):
        acc = 0.9 * acc + z[i]
        noise[i] = acc
    temp = cfg.temp_mean + day_offset[day] + cfg.temp_amplitude * np.sin(2 * np.pi * (hour - 9.0) / 24.0) + noise

    leave = rng.normal(*cfg.ev_leave_h, n_days)
    back = rng.normal(*cfg.ev_back_h, n_days)
    office = rng.random(n_days) >= cfg.home_office_prob
    away = (~weekend) & office[day] & (hour >= leave[day]) & (hour < back[day])
    presence = (~away).astype(float)

    load = (
        cfg.base_load_kw
        + presence * (0.8 * _bump(hour, 7.0, 0.7) + 1.5 * _bump(hour, 19.0, 1.2))
        + rng.gamma(2.0, 0.1, len(hour))
    )
    water = presence * (
        cfg.water_peak_lpm * _bump(hour, 7.0, 0.5) * rng.uniform(0.5, 1.0, n_days)[day]
        + 0.8 * cfg.water_peak_lpm * _bump(hour, 20.0, 0.8) * rng.uniform(0.3, 1.0, n_days)[day]
    ) + 0.05 * rng.random(len(hour))
    water = np.minimum(water, 1.5)
    for d_i in range(n_days):
        for _ in range(rng.poisson(cfg.showers_per_day)):
            h = rng.normal(7.0, 0.75) if rng.random() < 0.6 else rng.normal(20.5, 1.5)
            k = d_i * STEPS_PER_DAY + int(np.clip(h, 0, 23.75) * 60) // STEP_MIN
            if presence[k] > 0:
                water[k] += rng.uniform(*cfg.shower_litres) / STEP_MIN

    trips = rng.uniform(*cfg.ev_trip_kwh, n_days)
    away_steps = np.maximum(np.bincount(day, weights=away, minlength=n_days), 1)
    drain = np.where(away, trips[day] / away_steps[day], 0.0)

    cut = slice(0, n)
    wgain = cfg.dhw_litres * WATER_KWH_PER_L_K
    components = (
        ComponentSpec("pv", capacity=cfg.pv_kwp),
        ComponentSpec("nonflex_load"),
        ComponentSpec(
            "battery",
            p_max_charge=cfg.battery_kw,
            p_max_discharge=cfg.battery_kw,
            capacity=cfg.battery_kwh,
            initial_state=cfg.battery_soc0 * cfg.battery_kwh,
        ),
        ComponentSpec(
            "ev",
            p_max_charge=cfg.ev_kw,
            capacity=cfg.ev_kwh,
            initial_state=cfg.ev_soc0 * cfg.ev_kwh,
            availability=presence[cut],
            drain=drain[cut],
        ),
        ComponentSpec(
            "space_heating",
            p_max_charge=cfg.sh_kw,
            initial_state=float(np.mean(cfg.sh_band)),
            comfort_band=tuple(cfg.sh_band),
            thermal_params=(cfg.sh_loss, cfg.sh_gain),
        ),
        ComponentSpec(
            "dhw_tank",
            p_max_charge=cfg.dhw_kw,
            initial_state=float(np.mean(cfg.dhw_band)),
            comfort_band=tuple(cfg.dhw_band),
            thermal_params=(cfg.dhw_loss, wgain),
        ),
    )
    return BuildingScenario(
        components=components,
        irradiance=irr[cut],
        temperature=temp[cut],
        presence=presence[cut],
        nonflex_load=load[cut],
        water_draw=water[cut],
        days=cfg.days,
        horizon=cfg.horizon,
        seed=seed,
        start_weekday=cfg.start_weekday,
    )


def with_components(s: BuildingScenario, components) -> BuildingScenario:
    """Copy of ``s`` with a different component list (fresh caches)."""
    return replace(s, components=tuple(components), _cache={})
