import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexcast.approx import (
    Gmm3D,
    Normal2DSum,
    SkewNormal2DSum,
    erf,
    eval_skewnormal,
    fit_2d_nd,
    fit_2d_snd,
    fit_3d_gmm,
    lm_fit,
    parameter_count,
    reconstruct,
)
from flexcast.approx.densities import normal_density
from flexcast.approx.surfaces import (
    fit_nd_slice,
    fit_rss,
    fit_snd_slice,
    gmm_surface,
    nd_curve,
    snd_curve,
)
from flexcast.envelope import FlexibilityEnvelope, GridMismatchError, LeadTimeGrid, PowerGrid
from oracles import mp_normal_cdf, mp_skewnormal

X = PowerGrid().levels()


def envelope_from(D, pg=None, lg=None):
    pg = pg or PowerGrid()
    lg = lg or LeadTimeGrid()
    return FlexibilityEnvelope(pg, lg, np.clip(D, 0, lg.remaining()[:, None]))


def nd_slice_truth(rng):
    """Two separated bells with well-conditioned weights and widths."""
    return np.array([rng.uniform(150, 400), rng.uniform(-8, -2), rng.uniform(1.0, 3.0),
                     rng.uniform(80, 300), rng.uniform(2, 9), rng.uniform(1.0, 3.0)])


# --- densities ------------------------------------------------------------


def test_erf_against_high_precision():
    xs = np.linspace(-6, 6, 241)
    want = np.array([2 * mp_normal_cdf(x * math.sqrt(2)) - 1 for x in xs])
    assert np.max(np.abs(erf(xs) - want)) <= 1.5e-7


def test_skewnormal_zero_alpha_is_normal():
    x = np.linspace(-10, 10, 2001)
    for xi, om in ((0.0, 1.0), (1.5, 0.4), (-3.0, 2.5)):
        assert np.max(np.abs(eval_skewnormal(x, xi, om, 0.0) - normal_density(x, xi, om))) <= 1e-9


def test_skewnormal_at_location():
    for a in (-3.0, 0.0, 0.7, 9.0):
        assert eval_skewnormal(2.0, 2.0, 1.0, a) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)


def test_skewnormal_against_mpmath():
    assert float(eval_skewnormal(-1.0, 0.0, 1.0, 5.0)) == pytest.approx(mp_skewnormal(-1.0, 0.0, 1.0, 5.0), abs=1e-7)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, xi, om, a = rng.uniform(-4, 4), rng.uniform(-2, 2), rng.uniform(0.3, 3), rng.uniform(-8, 8)
        assert float(eval_skewnormal(x, xi, om, a)) == pytest.approx(mp_skewnormal(x, xi, om, a), abs=2e-7 / om)


def test_skewnormal_unit_mass():
    rng = np.random.default_rng(1)
    for _ in range(100):
        xi, om, a = rng.uniform(-5, 5), rng.uniform(0.1, 5), rng.uniform(-10, 10)
        x = np.linspace(xi - 12 * om, xi + 12 * om, 20001)
        assert np.trapezoid(eval_skewnormal(x, xi, om, a), x) == pytest.approx(1.0, abs=1e-5)


def test_skewnormal_rejects_bad_scale():
    with pytest.raises(ValueError):
        eval_skewnormal(0.0, 0.0, 0.0, 1.0)


# --- Levenberg-Marquardt --------------------------------------------------


def test_lm_exact_start():
    p0 = np.array([100.0, 2.0, 1.5])
    y = nd_curve(X, np.r_[p0, 0.0, 0.0, 1.0])
    p, rep = lm_fit(lambda q: nd_curve(X, np.r_[q, 0.0, 0.0, 1.0]) - y, p0)
    assert rep.rss <= 1e-16 and rep.iterations == 0
    assert np.array_equal(p, p0)


def test_lm_quadratic_model():
    x = np.linspace(-2, 2, 9)
    p, rep = lm_fit(lambda q: q[0] * x * x - 3 * x * x, [0.0])
    assert p[0] == pytest.approx(3.0, abs=1e-8)
    assert rep.iterations <= 5 and rep.converged


@pytest.mark.parametrize("seed", range(5))
def test_lm_recovers_single_gaussian(seed):
    truth = np.array([100.0, 2.0, 1.5])
    y = nd_curve(X, np.r_[truth, 0.0, 0.0, 1.0])
    rng = np.random.default_rng(seed)
    init = truth * rng.uniform(0.8, 1.2, 3)
    res = lambda q: nd_curve(X, np.r_[q, 0.0, 0.0, 1.0]) - y  # noqa: E731
    p, rep = lm_fit(res, init)
    assert np.allclose(p, truth, atol=1e-4)


def test_lm_two_gaussian_recovery_rate():
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(40):
        truth = nd_slice_truth(rng)
        y = nd_curve(X, truth)
        res = lambda q: nd_curve(X, q) - y  # noqa: E731
        p, rep = lm_fit(res, truth * rng.uniform(0.8, 1.2, 6), batch_residual=res)
        hits += rep.converged and np.allclose(p, truth, atol=1e-4)
    assert hits >= 38


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_lm_never_worse_than_start(seed):
    rng = np.random.default_rng(seed)
    y = np.maximum(rng.normal(30, 20, len(X)), 0)
    init = np.array([rng.uniform(1, 500), rng.uniform(-10, 10), rng.uniform(0.2, 6)] * 2)
    res = lambda q: nd_curve(X, q) - y  # noqa: E731
    p, rep = lm_fit(res, init, batch_residual=res)
    r0 = res(init)
    assert rep.rss <= float(r0 @ r0) + 1e-9
    assert rep.rss == pytest.approx(float(res(p) @ res(p)))


def test_lm_rejects_underdetermined_and_nonfinite():
    with pytest.raises(ValueError):
        lm_fit(lambda q: q[:1], [1.0, 2.0])
    with pytest.raises(ValueError):
        lm_fit(lambda q: q, [np.nan])


# --- 2D fits --------------------------------------------------------------


def test_nd_recovers_single_scaled_bell():
    y = 80 * normal_density(X, 1.0, 2.0)
    p, rep, degen = fit_nd_slice(X, y, 0.5)
    assert not degen
    assert p[:3] == pytest.approx([80.0, 1.0, 2.0], abs=1e-4)
    assert abs(p[3]) < 1e-4


def test_all_zero_slice_is_degenerate():
    D = np.zeros((22, 53))
    D[3:, 20:30] = 50
    env = envelope_from(D)
    nd, _ = fit_2d_nd(env)
    assert nd.degenerate[:3] == (True, True, True) and not any(nd.degenerate[3:])
    assert np.array_equal(nd.params[0], [0, 0, 1, 0, 0, 1])
    rec = reconstruct(nd)
    assert np.all(rec.durations[:3] == 0)
    snd, _ = fit_2d_snd(env, nd)
    assert np.all(reconstruct(snd).durations[:3] == 0)


def test_snd_nests_nd_slice():
    rng = np.random.default_rng(3)
    for _ in range(10):
        y = np.maximum(nd_curve(X, nd_slice_truth(rng)) + rng.normal(0, 3, len(X)), 0)
        p_nd, rep_nd, _ = fit_nd_slice(X, y, 0.5)
        c1, m1, s1, c2, m2, s2 = p_nd
        # the ND solution evaluated inside the SND residual with zero skew
        as_snd = np.array([c1, m1, s1, 0.0, c2, m2, s2, 0.0])
        assert np.allclose(snd_curve(X, as_snd), nd_curve(X, p_nd), atol=1e-12)
        _, rep_snd = fit_snd_slice(X, y, p_nd)
        assert rep_snd.rss <= rep_nd.rss + 1e-9


def test_snd_symmetric_slice_stays_unskewed():
    y = 200 * normal_density(X, 0.0, 3.0)
    p_nd, rep_nd, _ = fit_nd_slice(X, y, 0.5)
    p, rep = fit_snd_slice(X, y, p_nd)
    assert abs(p[3]) < 0.5
    assert math.sqrt(rep.rss / len(X)) <= math.sqrt(rep_nd.rss / len(X)) + 1e-6


def test_snd_detects_positive_skew():
    y = 300 * eval_skewnormal(X, -3.0, 4.0, 4.0)
    p_nd, _, _ = fit_nd_slice(X, y, 0.5)
    p, rep = fit_snd_slice(X, y, p_nd)
    bells = p.reshape(2, 4)
    dominant = bells[np.argmax(np.abs(bells[:, 0]))]
    assert dominant[3] > 0
    assert rep.rss < 1e-3


def test_default_parameter_counts():
    assert parameter_count("nd") == 132
    assert parameter_count("snd") == 176
    assert parameter_count("gmm") == 90
    assert 1166 / 132 == pytest.approx(8.83, abs=0.01)
    assert 1166 / 176 == pytest.approx(6.63, abs=0.01)
    assert 1166 / 90 == pytest.approx(12.96, abs=0.01)


def test_2d_fits_store_expected_counts_and_nest():
    rng = np.random.default_rng(4)
    lg = LeadTimeGrid()
    rows = [np.maximum(nd_curve(X, nd_slice_truth(rng)), 0) for _ in range(lg.size)]
    env = envelope_from(np.array(rows))
    nd, _ = fit_2d_nd(env)
    snd, _ = fit_2d_snd(env, nd)
    assert nd.parameter_count == 132 and snd.parameter_count == 176
    assert fit_rss(snd, env) <= fit_rss(nd, env) + 1e-6
    assert reconstruct(nd).durations.shape == (22, 53)


def test_in_family_roundtrip():
    # slices that are exactly two bells and stay within the clamp range
    lg = LeadTimeGrid()
    rng = np.random.default_rng(5)
    rows = []
    for rem in lg.remaining():
        t = nd_slice_truth(rng)
        t[[0, 3]] *= 0.5 * rem / max(nd_curve(X, t).max(), 1e-9)
        rows.append(nd_curve(X, t))
    env = FlexibilityEnvelope(PowerGrid(), lg, np.array(rows))
    nd, _ = fit_2d_nd(env)
    assert np.max(np.abs(reconstruct(nd).durations - env.durations)) <= 1e-3


# --- 3D fit ---------------------------------------------------------------


def _small_grids():
    return PowerGrid(-4, 4, 0.5), LeadTimeGrid((0, 30, 60, 90, 120, 150, 180, 240), 480)


def test_gmm_single_component_recovery():
    pg, lg = _small_grids()
    truth = np.array([[20000.0, 90.0, 0.5, 70.0, 1.8]])
    L, P = np.meshgrid(lg.array(), pg.levels(), indexing="ij")
    D = gmm_surface(L.ravel(), P.ravel(), truth).reshape(L.shape)
    assert D.max() < lg.remaining().min()
    model, rep = fit_3d_gmm(FlexibilityEnvelope(pg, lg, D), K=1)
    assert np.allclose(model.params, truth, rtol=1e-3, atol=1e-3)


def test_gmm_edge_duplication_helps_boundary_slices():
    pg, lg = _small_grids()
    L, P = np.meshgrid(lg.array(), pg.levels(), indexing="ij")
    # a tent in power that grows with lead time: outside the Gaussian family, nonzero at both edges
    D = np.clip(50 - 8 * np.abs(P) + L / 10, 0, None)
    env = envelope_from(D, pg, lg)

    def edge_rss(dup):
        m, _ = fit_3d_gmm(env, K=3, duplicate_edges=dup)
        r = m.evaluate() - env.durations
        return float((r[[0, -1]] ** 2).sum())

    assert edge_rss(True) <= edge_rss(False)


def test_gmm_default_parameter_count_and_errors():
    pg, lg = _small_grids()
    env = envelope_from(np.full((lg.size, pg.size), 10.0), pg, lg)
    with pytest.raises(ValueError):
        fit_3d_gmm(env, K=0)
    with pytest.raises(ValueError):
        fit_3d_gmm(env, K=60)
    model = Gmm3D(PowerGrid(), LeadTimeGrid(), np.tile([1.0, 0.0, 0.0, 1.0, 1.0], (18, 1)))
    assert model.parameter_count == 90


# --- reconstruction -------------------------------------------------------


def test_zero_weight_models_reconstruct_to_zero():
    pg, lg = PowerGrid(), LeadTimeGrid()
    nd = Normal2DSum(pg, lg, np.tile([0.0, 1.0, 1.0, 0.0, -1.0, 2.0], (lg.size, 1)))
    snd = SkewNormal2DSum(pg, lg, np.tile([0.0, 1.0, 1.0, 3.0, 0.0, -1.0, 2.0, -1.0], (lg.size, 1)))
    gmm = Gmm3D(pg, lg, np.tile([0.0, 10.0, 1.0, 5.0, 1.0], (18, 1)))
    for m in (nd, snd, gmm):
        assert np.all(reconstruct(m).durations == 0)


def test_reconstruction_clamps_and_checks_grid():
    pg, lg = PowerGrid(), LeadTimeGrid()
    big = Normal2DSum(pg, lg, np.tile([1e6, 0.0, 1.0, -1e6, 8.0, 1.0], (lg.size, 1)))
    D = reconstruct(big).durations
    assert np.all(D >= 0) and np.all(D <= lg.remaining()[:, None])
    assert D.max() == lg.remaining().max() and D.min() == 0
    with pytest.raises(GridMismatchError):
        reconstruct(big, PowerGrid(-1, 1, 0.5))


def test_reconstruction_is_pure():
    pg, lg = PowerGrid(), LeadTimeGrid()
    m = Gmm3D(pg, lg, np.tile([5e4, 300.0, 1.0, 200.0, 3.0], (18, 1)))
    a = reconstruct(m).durations
    b = reconstruct(m).durations
    assert np.array_equal(a, b)
