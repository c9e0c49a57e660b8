"""Accuracy metrics, timing, and CSV report tables."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from flexcast.envelope import PowerGrid
from flexcast.io import atomic_write_text


class MetricError(ValueError):
    pass


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise MetricError("empty inputs")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


@dataclass(frozen=True)
class Score:
    """An R2 value, or ``defined=False`` when the truth has no variance."""

    value: float
    defined: bool = True

    def __float__(self) -> float:
        return self.value


def r2(pred, truth) -> Score:
    pred, truth = _pair(pred, truth)
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    ss_res = float(np.sum((pred - truth) ** 2))
    if ss_tot == 0.0:
        return Score(math.nan, False)
    return Score(1.0 - ss_res / ss_tot)


def per_level_breakdown(pred, truth, pg: PowerGrid | None = None):
    """Per power level MAE and R2 over all samples and lead times.

    Inputs are [n, lead, power] (or [lead, power]). Returns (mae, r2, defined)
    vectors; r2 is NaN wherever ``defined`` is False.
    """
    pred, truth = _pair(pred, truth)
    P = pred.shape[-1]
    if pg is not None and pg.size != P:
        raise MetricError(f"power grid has {pg.size} levels, data has {P}")
    p = pred.reshape(-1, P)
    t = truth.reshape(-1, P)
    m = np.abs(p - t).mean(axis=0)
    ss_tot = ((t - t.mean(axis=0)) ** 2).sum(axis=0)
    ss_res = ((p - t) ** 2).sum(axis=0)
    defined = ss_tot > 0
    score = np.full(P, np.nan)
    score[defined] = 1.0 - ss_res[defined] / ss_tot[defined]
    return m, score, defined


@dataclass(frozen=True)
class Timing:
    mean: float
    std: float
    runs: int

    def __str__(self) -> str:
        return f"{self.mean:.6f} +/- {self.std:.6f} s ({self.runs} runs)"


def timing_harness(task: Callable[[], object], repeats: int = 5, per: int = 1) -> Timing:
    """Wall-clock mean and std of ``task`` over ``repeats`` runs, divided by ``per`` items."""
    if repeats < 1 or per < 1:
        raise MetricError("repeats and per must be positive")
    secs = []
    for _ in range(repeats):
        t = time.perf_counter()
        task()
        secs.append((time.perf_counter() - t) / per)
    s = np.array(secs)
    return Timing(float(s.mean()), float(s.std()), repeats)


@dataclass
class EvalReport:
    model: str
    mae_minutes: float
    r2: Score
    seconds_per_envelope: float = math.nan
    mae_by_level: np.ndarray | None = None
    r2_by_level: np.ndarray | None = None
    r2_defined: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mae_minutes < 0:
            raise MetricError("negative MAE")
        if self.r2.defined and self.r2.value > 1 + 1e-12:
            raise MetricError("R2 above 1")


def evaluate(model: str, pred, truth, seconds_per_envelope: float = math.nan, **extra) -> EvalReport:
    m, s, ok = per_level_breakdown(pred, truth)
    return EvalReport(model, mae(pred, truth), r2(pred, truth), seconds_per_envelope, m, s, ok, dict(extra))


# --- report tables -----------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, Score):
        return "undefined" if not x.defined else f"{x.value:.6f}"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def table1(reports, oracle_seconds: float | None = None) -> str:
    """Accuracy and timing per model. The oracle row times full quantification.

    ``seconds_per_envelope`` is the batch cost; ``single_shot_seconds`` is the
    latency of predicting one envelope on its own, when the report has it.
    """
    rows = []
    if oracle_seconds is not None:
        rows.append(["oracle", 0.0, Score(1.0), float(oracle_seconds), float(oracle_seconds)])
    for r in reports:
        rows.append([r.model, r.mae_minutes, r.r2, r.seconds_per_envelope,
                     float(r.extra.get("single_seconds", math.nan))])
    return csv_text(["model", "mae_min", "r2", "seconds_per_envelope", "single_shot_seconds"], rows)


def by_level(reports, pg: PowerGrid, what: str) -> str:
    """Long-format per-level table; undefined R2 cells are kept and flagged."""
    rows = []
    for r in reports:
        for j, p in enumerate(pg.levels()):
            if what == "mae":
                rows.append([r.model, float(p), float(r.mae_by_level[j])])
            else:
                ok = bool(r.r2_defined[j])
                rows.append([r.model, float(p), float(r.r2_by_level[j]) if ok else "undefined", int(ok)])
    header = ["model", "p_kw", "mae_min"] if what == "mae" else ["model", "p_kw", "r2", "defined"]
    return csv_text(header, rows)


@dataclass
class ApproxRow:
    approximator: str
    parameters: int
    compression: float
    mae_minutes: float
    r2: Score
    rss: float
    seconds_per_envelope: float


def table2(rows) -> str:
    return csv_text(
        ["approximator", "parameters", "compression", "mae_min", "r2", "rss", "seconds_per_envelope"],
        [[r.approximator, r.parameters, r.compression, r.mae_minutes, r.r2, r.rss, r.seconds_per_envelope]
         for r in rows],
    )


def table3(rows) -> str:
    """rows: (label, EvalReport) pairs, e.g. benchmark, best predictor, best approximator, combination."""
    return csv_text(["row", "model", "mae_min", "r2"], [[label, r.model, r.mae_minutes, r.r2] for label, r in rows])


def write_reports(out_dir, pg: PowerGrid, predictors=(), approximators=(), combined=(), oracle_seconds=None) -> list[Path]:
    out = Path(out_dir)
    written = []

    def put(name, text):
        atomic_write_text(out / name, text)
        written.append(out / name)

    if predictors:
        put("table1.csv", table1(predictors, oracle_seconds))
        put("fig4_mae_by_level.csv", by_level(predictors, pg, "mae"))
        put("fig5_r2_by_level.csv", by_level(predictors, pg, "r2"))
    if approximators:
        put("table2.csv", table2(approximators))
    if combined:
        put("table3.csv", table3(combined))
    return written


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
