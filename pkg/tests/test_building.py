import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexcast.building import (
    DT_H,
    FEATURE_NAMES,
    STEP_MIN,
    BuildingScenario,
    ComponentSpec,
    GeneratorConfig,
    InvalidScenarioError,
    OutOfSpanError,
    _store_dynamics,
    expected_irradiance,
    extract_features,
    extremal_bounds,
    generate_scenario,
    quantify_series,
    quantify_tick,
    time_of_day_from_features,
    with_components,
)
from flexcast.envelope import LeadTimeGrid, PowerGrid, build_envelope
from flexcast.scenario_file import scenario_from_text, scenario_to_text
from oracles import enumerate_upper_bound, lp_cumulative_import


def bare(components, horizon=120, seed=0, rng=None):
    """One-day scenario with given components and random mild exogenous series."""
    n = 96 + horizon // STEP_MIN
    rng = rng or np.random.default_rng(seed)
    return BuildingScenario(
        components=components,
        irradiance=np.zeros(n),
        temperature=rng.uniform(0, 15, n),
        presence=np.ones(n),
        nonflex_load=np.zeros(n),
        water_draw=rng.uniform(0, 0.3, n),
        days=1,
        horizon=horizon,
    )


def battery(e0, cap=17.5, kw=5.0):
    return ComponentSpec("battery", p_max_charge=kw, p_max_discharge=kw, capacity=cap, initial_state=e0)


def test_empty_battery_upper_bound_slope():
    b = extremal_bounds(bare([battery(0.0)], horizon=1440), 0)
    slope = np.diff(b.e_upper) / DT_H
    full_at = int(17.5 / (5 * DT_H))
    assert np.allclose(slope[:full_at], 5.0)
    assert np.allclose(slope[full_at:], 0.0)
    assert np.allclose(b.e_lower, 0.0)


def test_full_battery_bounds():
    b = extremal_bounds(bare([battery(17.5)], horizon=1440), 0)
    assert np.allclose(b.e_upper, 0.0)
    slope = np.diff(b.e_lower) / DT_H
    empty_at = int(17.5 / (5 * DT_H))
    assert np.allclose(slope[:empty_at], -5.0)
    assert np.allclose(slope[empty_at:], 0.0)


def test_bounds_share_origin_and_contain_reference():
    s = generate_scenario(GeneratorConfig(days=1), seed=3)
    for t0 in (0, 450, 1425):
        b = extremal_bounds(s, t0)
        assert b.e_upper[0] == b.e_lower[0] == b.e_ref[0] == 0
        assert b.contains_reference(1e-7)


def _stores(rng, n):
    """Battery, EV with an availability window, and a space-heating store."""
    avail = np.ones(96 + n)
    gap = int(rng.integers(1, n))
    avail[gap : gap + int(rng.integers(1, 4))] = 0.0
    return [
        battery(float(rng.uniform(0, 5)), cap=5.0, kw=float(rng.uniform(1, 5))),
        ComponentSpec("ev", p_max_charge=float(rng.uniform(2, 7)), capacity=10.0,
                      initial_state=float(rng.uniform(0, 10)), availability=avail),
        ComponentSpec("space_heating", p_max_charge=4.0, initial_state=21.0, comfort_band=(20.0, 23.0),
                      thermal_params=(0.02, 5.0)),
    ]


@pytest.mark.parametrize("seed", range(12))
def test_greedy_matches_lp_per_prefix(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    comps = _stores(rng, n)
    s = bare(comps, horizon=n * STEP_MIN, rng=rng)
    b = extremal_bounds(s, 0)
    want_up = np.zeros(n + 1)
    want_lo = np.zeros(n + 1)
    for c in comps:
        a, bb, pch, pdis = _store_dynamics(s, c, 0, n)
        e0 = c.initial_energy
        want_up += lp_cumulative_import(e0, c.storage_capacity, a, bb, pch, pdis, DT_H, 1)
        want_lo += lp_cumulative_import(e0, c.storage_capacity, a, bb, pch, pdis, DT_H, -1)
    assert np.allclose(b.e_upper, want_up, atol=1e-7)
    assert np.allclose(b.e_lower, want_lo, atol=1e-7)


@pytest.mark.parametrize("e0", [0.0, 0.625, 1.875])
def test_greedy_matches_enumeration_lossless(e0):
    # the 0.5 kW lattice moves 0.125 kWh per step, which divides the room left
    s = bare([battery(e0, cap=2.0, kw=4.0)], horizon=4 * STEP_MIN)
    b = extremal_bounds(s, 0)
    want = enumerate_upper_bound(e0, 2.0, np.full(4, 4.0), DT_H, levels=9)
    assert np.allclose(b.e_upper, want, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_adding_storage_never_narrows_corridor(seed):
    rng = np.random.default_rng(seed)
    comps = _stores(rng, 8)
    s = bare(comps[:2], horizon=8 * STEP_MIN, rng=np.random.default_rng(seed))
    more = with_components(s, comps)
    b0, b1 = extremal_bounds(s, 0), extremal_bounds(more, 0)
    assert np.all(b1.e_upper - b1.e_lower >= b0.e_upper - b0.e_lower - 1e-9)


def test_inverted_comfort_band_rejected():
    with pytest.raises(InvalidScenarioError):
        ComponentSpec("space_heating", p_max_charge=4, initial_state=21, comfort_band=(23, 20),
                      thermal_params=(0.02, 5.0))


def test_generation_is_deterministic():
    cfg = GeneratorConfig(days=2)
    a = scenario_to_text(generate_scenario(cfg, seed=0))
    b = scenario_to_text(generate_scenario(cfg, seed=0))
    assert a == b
    assert a != scenario_to_text(generate_scenario(cfg, seed=1))


def test_scenario_file_roundtrip():
    s = generate_scenario(GeneratorConfig(days=1), seed=5)
    back = scenario_from_text(scenario_to_text(s))
    assert scenario_to_text(back) == scenario_to_text(s)
    e1 = quantify_tick(s, 300)
    e2 = quantify_tick(back, 300)
    assert np.allclose(e1.durations, e2.durations)


def test_night_irradiance_zero():
    s = generate_scenario(GeneratorConfig(days=3), seed=1)
    assert np.all(s.irradiance[::96] == 0)


@pytest.mark.parametrize("rho", [0.0, 0.7])
def test_midday_irradiance_matches_closed_form(rho):
    cfg = GeneratorConfig(days=30, weather_persistence=rho)
    s = generate_scenario(cfg, seed=11)
    noon = 12 * 4
    got = s.irradiance[noon : 30 * 96 : 96]
    want = expected_irradiance(cfg, 12.0)
    # clearness ~ U(1 - spread, 1), so one day's noon value has this sd
    sd = float(want) / (1 - cfg.clearness_spread / 2) * cfg.clearness_spread / math.sqrt(12)
    inflation = math.sqrt((1 + rho) / (1 - rho))  # AR(1) variance of the mean
    assert abs(got.mean() - want) <= 3 * sd * inflation / math.sqrt(len(got))


def test_invalid_generator_config():
    with pytest.raises(InvalidScenarioError):
        generate_scenario(GeneratorConfig(days=0))
    with pytest.raises(InvalidScenarioError):
        generate_scenario(GeneratorConfig(weather_persistence=1.0))


def test_features_match_manual_lookup():
    s = generate_scenario(GeneratorConfig(days=2), seed=2)
    for t0 in (0, 360, 735, 2000 - 2000 % 15):
        k = t0 // 15
        f = extract_features(s, t0)
        assert len(f) == len(FEATURE_NAMES) == 16
        ref = s.reference_energies()
        sh, dhw = s.component("space_heating"), s.component("dhw_tank")
        manual = [
            math.sin(2 * math.pi * (t0 % 1440) / 1440),
            math.cos(2 * math.pi * (t0 % 1440) / 1440),
            s.irradiance[k], s.temperature[k], s.presence[k], s.nonflex_load[k], s.water_draw[k],
            *sh.comfort_band, *dhw.comfort_band,
            ref["battery"][k], ref["ev"][k],
            s.pv_power()[k] * 0.25,
            sh.comfort_band[0] + ref["space_heating"][k] / sh.thermal_params[1],
            dhw.comfort_band[0] + ref["dhw_tank"][k] / dhw.thermal_params[1],
        ]
        assert np.allclose(f, manual)


@pytest.mark.parametrize("t0,sc", [(0, (0.0, 1.0)), (360, (1.0, 0.0)), (1080, (-1.0, 0.0))])
def test_time_encoding(t0, sc):
    s = generate_scenario(GeneratorConfig(days=1), seed=0)
    f = extract_features(s, t0)
    assert f[:2] == pytest.approx(sc, abs=1e-12)
    assert time_of_day_from_features(f)[0] == pytest.approx(t0 % 1440, abs=1e-9)


def test_out_of_span():
    s = generate_scenario(GeneratorConfig(days=1), seed=0)
    with pytest.raises(OutOfSpanError):
        extract_features(s, 1440)
    with pytest.raises(OutOfSpanError):
        extremal_bounds(s, 7)


def test_one_day_gives_96_envelopes_and_timings():
    s = generate_scenario(GeneratorConfig(days=1), seed=0)
    q = quantify_series(s)
    assert len(q) == 96 and len(q.seconds) == 96
    assert all(sec > 0 for sec in q.seconds)
    env = q.envelopes[17]
    again = build_envelope(extremal_bounds(s, q.instants[17]), PowerGrid(), LeadTimeGrid())
    assert np.array_equal(env.durations, again.durations)


def test_weekends_excluded_by_default():
    s = generate_scenario(GeneratorConfig(days=7), seed=0)
    q = quantify_series(s, cadence=60)
    assert len(q) == 5 * 24
    assert not any(s.is_weekend(t) for t in q.instants)


def test_parallel_quantification_matches_serial():
    s = generate_scenario(GeneratorConfig(days=1), seed=4)
    a = quantify_series(s, cadence=120)
    b = quantify_series(s, cadence=120, jobs=2)
    assert a.instants == b.instants
    for x, y in zip(a.envelopes, b.envelopes):
        assert np.array_equal(x.durations, y.durations)
