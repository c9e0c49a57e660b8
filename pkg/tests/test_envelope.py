import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexcast.envelope import (
    EnergyBounds,
    EnvelopeError,
    FlexibilityEnvelope,
    GridMismatchError,
    InvalidBoundsError,
    LeadOutOfHorizonError,
    LeadTimeGrid,
    PowerGrid,
    build_envelope,
    derive_sustained_duration,
    envelope_delta,
    envelope_from_csv,
    envelope_to_csv,
)
from oracles import brute_force_duration, random_corridor


def flat(n=4, step=15):
    t = np.arange(n + 1) * float(step)
    z = np.zeros(n + 1)
    return EnergyBounds(t, z, z, z)


def battery_bounds(cap=1.0, kw=1.0, soc=0.5, n=4):
    """Lone battery at ``soc`` with flat reference, sampled at 15 min."""
    t = np.arange(n + 1) * 15.0
    up = np.minimum(kw * t / 60.0, cap * (1 - soc))
    lo = np.maximum(-kw * t / 60.0, -cap * soc)
    return EnergyBounds(t, up, lo, np.zeros(n + 1))


def test_default_power_grid_has_53_levels():
    pg = PowerGrid()
    assert pg.size == 53
    assert pg.levels()[0] == -12.0 and pg.levels()[-1] == 14.0


def test_default_lead_grid():
    lg = LeadTimeGrid()
    assert lg.size == 22
    assert lg.offsets[0] == 0 and lg.offsets[-1] <= lg.horizon == 1440
    gaps = np.diff(lg.offsets)
    assert np.all(gaps > 0) and np.all(np.diff(gaps) >= 0)


@pytest.mark.parametrize("args", [(1.0, 1.0, 0.5), (0.0, 1.0, 0.3), (-1.0, 1.0, 0.0)])
def test_power_grid_rejects_bad_geometry(args):
    with pytest.raises(EnvelopeError):
        PowerGrid(*args)


@pytest.mark.parametrize("offs", [(5, 10), (0, 10, 10), (0, 2000)])
def test_lead_grid_rejects_bad_offsets(offs):
    with pytest.raises(EnvelopeError):
        LeadTimeGrid(offs, 1440)


def test_zero_width_corridor():
    b = flat()
    assert derive_sustained_duration(b, 0, 0.0) == 60
    assert derive_sustained_duration(b, 15, 0.0) == 45
    assert derive_sustained_duration(b, 0, 1.0) == 0


def test_battery_half_full_lasts_30_minutes():
    b = battery_bounds()
    assert derive_sustained_duration(b, 0, 1.0) == pytest.approx(30.0)
    assert derive_sustained_duration(b, 0, -1.0) == pytest.approx(30.0)
    assert brute_force_duration(b.times, b.e_upper, b.e_lower, b.e_ref, 0, 1.0, 60) == 30


def test_three_level_two_lead_matches_oracle():
    b = battery_bounds()
    env = build_envelope(b, PowerGrid(-1, 1, 1), LeadTimeGrid((0, 15), 60))
    for i, lead in enumerate((0, 15)):
        for j, p in enumerate((-1.0, 0.0, 1.0)):
            ref = brute_force_duration(b.times, b.e_upper, b.e_lower, b.e_ref, lead, p, 60)
            assert math.floor(env.durations[i, j] + 1e-7) == ref


def test_zero_width_envelope_only_power_zero_column():
    env = build_envelope(flat(96), PowerGrid(), LeadTimeGrid())
    zero = int(np.flatnonzero(PowerGrid().levels() == 0)[0])
    assert env.n_entries == 1166
    assert np.all(np.delete(env.durations, zero, axis=1) == 0)
    assert np.allclose(env.durations[:, zero], LeadTimeGrid().remaining())


def test_lead_outside_horizon():
    with pytest.raises(LeadOutOfHorizonError):
        derive_sustained_duration(flat(), 61, 0.0)
    with pytest.raises(LeadOutOfHorizonError):
        derive_sustained_duration(flat(), -1, 0.0)


def test_invalid_bounds():
    t = np.arange(3) * 15.0
    with pytest.raises(InvalidBoundsError):
        EnergyBounds(t, np.zeros(3), np.array([0.0, 1.0, 0.0]), np.zeros(3))
    with pytest.raises(InvalidBoundsError):
        EnergyBounds(np.array([0.0, 0.0, 15.0]), np.zeros(3), np.zeros(3), np.zeros(3))


def test_envelope_delta():
    pg, lg = PowerGrid(0, 1, 1), LeadTimeGrid((0,), 60)
    a = FlexibilityEnvelope(pg, lg, np.full((1, 2), 60.0))
    b = FlexibilityEnvelope(pg, lg, np.full((1, 2), 45.0))
    assert np.all(envelope_delta(a, b) == 15)
    assert np.all(envelope_delta(a, a) == 0)
    with pytest.raises(GridMismatchError):
        envelope_delta(a, FlexibilityEnvelope(PowerGrid(0, 2, 1), lg, np.zeros((1, 3))))


def test_csv_roundtrip_and_header():
    b = battery_bounds(n=8)
    env = build_envelope(b, PowerGrid(-1, 1, 0.5), LeadTimeGrid((0, 15, 45), 120))
    text = envelope_to_csv(env)
    assert text.splitlines()[0] == "lead_min,p_kw,duration_min"
    back = envelope_from_csv(text, horizon=120)
    assert back.same_grid(env)
    assert np.allclose(back.durations, env.durations, atol=5e-4)


def test_csv_rejects_foreign_header():
    with pytest.raises(EnvelopeError):
        envelope_from_csv("a,b,c\n1,2,3\n")


def test_randomized_oracle_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        times, up, lo, ref = random_corridor(rng, n)
        b = EnergyBounds(times, up, lo, ref)
        horizon = 15 * n
        n_levels = int(rng.integers(1, 8))
        powers = np.round(rng.uniform(-6, 6, n_levels) * 2) / 2
        leads = sorted({0, *rng.integers(0, horizon, 3).tolist()})
        for lead in leads:
            for p in powers:
                d = derive_sustained_duration(b, lead, float(p))
                assert math.floor(d + 1e-7) == brute_force_duration(times, up, lo, ref, lead, float(p), horizon)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), widen=st.floats(0.0, 3.0))
def test_widening_corridor_never_shortens(seed, widen):
    rng = np.random.default_rng(seed)
    times, up, lo, ref = random_corridor(rng, int(rng.integers(1, 9)))
    grow = widen * times / times[-1]
    narrow = build_envelope(EnergyBounds(times, up, lo, ref), PowerGrid(-4, 4, 1), LeadTimeGrid((0,), int(times[-1])))
    wide = build_envelope(EnergyBounds(times, up + grow, lo - grow, ref), PowerGrid(-4, 4, 1),
                          LeadTimeGrid((0,), int(times[-1])))
    assert np.all(wide.durations >= narrow.durations - 1e-9)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.5, 5.0), b=st.floats(0.0, 0.5), c=st.floats(0.5, 5.0), d=st.floats(0.0, 0.5))
def test_duration_decreases_away_from_reference(a, b, c, d):
    # concave upper and convex lower bound, flat reference
    t = np.array([0.0, 60.0, 120.0])
    up = np.array([0.0, a, a + b])
    lo = -np.array([0.0, c, c + d])
    bounds = EnergyBounds(t, up, lo, np.zeros(3))
    pg = PowerGrid(-6, 6, 0.5)
    row = build_envelope(bounds, pg, LeadTimeGrid((0,), 120)).durations[0]
    zero = int(np.flatnonzero(pg.levels() == 0)[0])
    assert np.all(np.diff(row[zero:]) <= 1e-9)
    assert np.all(np.diff(row[: zero + 1]) >= -1e-9)
    assert row[zero] == row.max()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_envelope_invariants(seed):
    rng = np.random.default_rng(seed)
    times, up, lo, ref = random_corridor(rng, 96)
    lg = LeadTimeGrid()
    env = build_envelope(EnergyBounds(times, up, lo, ref), PowerGrid(), lg)
    env.check()
    assert env.durations.shape == (22, 53)
