import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexcast.envelope import PowerGrid
from flexcast.metrics import (
    ApproxRow,
    MetricError,
    Score,
    by_level,
    evaluate,
    mae,
    per_level_breakdown,
    r2,
    read_table,
    table1,
    table2,
    table3,
    timing_harness,
    write_reports,
)


def test_mae_hand_examples():
    t = np.array([[10.0, 20.0], [25.0, 45.0]])
    p = np.array([[0.0, 20.0], [30.0, 40.0]])
    assert mae(p, t) == 5.0
    assert mae(t, t) == 0.0
    assert mae(t + 15, t) == 15.0


def test_r2_hand_examples():
    assert r2([10.0, 0.0], [0.0, 10.0]).value == -3.0
    t = np.array([1.0, 4.0, 9.0])
    assert r2(t, t).value == 1.0
    assert r2(np.full(3, t.mean()), t).value == pytest.approx(0.0, abs=1e-15)


def test_r2_undefined_on_constant_truth():
    s = r2([1.0, 2.0], [3.0, 3.0])
    assert not s.defined and math.isnan(s.value)


def test_shape_mismatch_and_empty():
    with pytest.raises(MetricError):
        mae(np.zeros(3), np.zeros(4))
    with pytest.raises(MetricError):
        r2([], [])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 100, 30)
    p = t + rng.normal(0, 10, 30)
    perm = rng.permutation(30)
    assert mae(p[perm], t[perm]) == pytest.approx(mae(p, t), rel=1e-12)
    assert r2(p[perm], t[perm]).value == pytest.approx(r2(p, t).value, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), bump=st.floats(1e-3, 10.0))
def test_r2_is_one_only_for_exact_match(seed, bump):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 100, 20)
    assert r2(t, t).value == 1.0
    p = t.copy()
    p[int(rng.integers(20))] += bump
    assert r2(p, t).value < 1.0


def test_per_level_breakdown():
    rng = np.random.default_rng(0)
    truth = rng.uniform(0, 60, (5, 3, 4))
    pred = truth.copy()
    m, s, ok = per_level_breakdown(pred, truth)
    assert np.all(m == 0) and np.all(s == 1) and ok.all()
    pred[:, :, 2] += 7
    m, _, _ = per_level_breakdown(pred, truth)
    assert np.array_equal(m, [0, 0, 7, 0])
    # equal column sizes: the scalar MAE is the mean of the per-level MAEs
    pred = truth + rng.normal(0, 5, truth.shape)
    m, _, _ = per_level_breakdown(pred, truth)
    assert m.mean() == pytest.approx(mae(pred, truth), rel=1e-12)


def test_per_level_flags_constant_columns():
    truth = np.zeros((4, 2, 3))
    truth[:, :, 1] = np.arange(8).reshape(4, 2)
    _, s, ok = per_level_breakdown(truth + 1, truth)
    assert list(ok) == [False, True, False]
    assert np.isnan(s[0]) and np.isnan(s[2]) and not np.isnan(s[1])
    with pytest.raises(MetricError):
        per_level_breakdown(truth, truth, PowerGrid(-1, 1, 0.5))


def test_timing_harness():
    t = timing_harness(lambda: None, repeats=20)
    assert t.mean < 1e-3 and t.runs == 20
    t = timing_harness(lambda: time.sleep(0.01), repeats=3)
    assert 0.009 <= t.mean < 0.05
    t = timing_harness(lambda: time.sleep(0.01), repeats=2, per=10)
    assert t.mean < 0.005
    with pytest.raises(MetricError):
        timing_harness(lambda: None, repeats=0)


def _reports():
    rng = np.random.default_rng(1)
    truth = rng.uniform(0, 60, (4, 2, 3))
    truth[:, :, 0] = 0
    a = evaluate("benchmark", truth + 3, truth, 0.001, single_seconds=0.002)
    b = evaluate("adaboost", truth + 1, truth, 0.0005)
    return a, b


def test_table1_and_figures(tmp_path):
    a, b = _reports()
    text = table1([a, b], oracle_seconds=0.01)
    lines = text.splitlines()
    assert lines[0] == "model,mae_min,r2,seconds_per_envelope,single_shot_seconds"
    assert lines[1].startswith("oracle,0.000000,1.000000,0.010000")
    assert lines[2].startswith("benchmark,3.000000,")
    assert lines[3].endswith(",nan")
    fig5 = by_level([a], PowerGrid(-1, 1, 1), "r2").splitlines()
    assert fig5[1] == "benchmark,-1.000000,undefined,0"
    written = write_reports(tmp_path, PowerGrid(-1, 1, 1), predictors=[a, b])
    assert {p.name for p in written} == {"table1.csv", "fig4_mae_by_level.csv", "fig5_r2_by_level.csv"}
    rows = read_table(tmp_path / "fig4_mae_by_level.csv")
    assert len(rows) == 6 and rows[0]["model"] == "benchmark"


def test_reports_are_deterministic(tmp_path):
    a, b = _reports()
    row = ApproxRow("2D-SND", 176, 1166 / 176, 2.5, Score(0.97), 10.0, 0.1)
    write_reports(tmp_path / "x", PowerGrid(-1, 1, 1), [a, b], [row], [("benchmark", a), ("combination", b)])
    write_reports(tmp_path / "y", PowerGrid(-1, 1, 1), [a, b], [row], [("benchmark", a), ("combination", b)])
    for name in ("table1.csv", "table2.csv", "table3.csv", "fig4_mae_by_level.csv", "fig5_r2_by_level.csv"):
        assert (tmp_path / "x" / name).read_text() == (tmp_path / "y" / name).read_text()
    assert table2([row]).splitlines()[1].startswith("2D-SND,176,6.625000,")
    assert table3([("combination", b)]).splitlines()[1].startswith("combination,adaboost,1.000000")
