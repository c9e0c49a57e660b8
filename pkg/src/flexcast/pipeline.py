"""End-to-end workflow: generate, quantify, train, predict, approximate, encode, evaluate."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from flexcast import wire
from flexcast.approx.surfaces import APPROXIMATORS, fit_rss, parameter_count, reconstruct
from flexcast.building import BuildingScenario, QuantifiedSeries, extract_features, generate_scenario, quantify_series
from flexcast.config import PipelineConfig, config_to_text
from flexcast.envelope import FlexibilityEnvelope
from flexcast.io import atomic_write_text
from flexcast.metrics import ApproxRow, EvalReport, csv_text, evaluate, mae, r2, timing_harness, write_reports
from flexcast.ml import models
from flexcast.ml.data import Dataset

log = logging.getLogger(__name__)

APPROX_LABELS = {"nd": "2D-ND", "snd": "2D-SND", "gmm": "3D-GMM"}


class InvariantViolation(RuntimeError):
    """A produced artifact failed one of the pipeline's own checks."""


def build_dataset(cfg: PipelineConfig) -> tuple[BuildingScenario, QuantifiedSeries, Dataset]:
    s = generate_scenario(cfg.generator, seed=cfg.seed)
    q = quantify_series(s, cadence=cfg.cadence, jobs=cfg.jobs)
    F = np.array([extract_features(s, t0) for t0 in q.instants])
    return s, q, Dataset.from_envelopes(F, q.envelopes)


def split(d: Dataset, cfg: PipelineConfig) -> tuple[Dataset, Dataset]:
    return d.split_last(cfg.test_steps)


def fit_predictor(kind: str, train: Dataset, cfg: PipelineConfig) -> models.TrainedModel:
    if kind == "benchmark":
        return models.fit_benchmark(train, cfg.benchmark_grid, cfg.folds)
    if kind == "lasso":
        return models.fit_lasso(train, cfg.lasso_grid, cfg.folds)
    if kind == "knn":
        return models.fit_knn(train, cfg.knn_grid, cfg.folds)
    if kind == "svr":
        return models.fit_svr(train, cfg.svr_grid, cfg.folds, lead_stride=cfg.lead_stride)
    if kind == "adaboost":
        return models.fit_adaboost(train, cfg.adaboost_estimators, cfg.adaboost_depths, cfg.folds,
                                   lead_stride=cfg.lead_stride, sampling=cfg.sampling, seed=cfg.seed)
    raise ValueError(f"unknown predictor {kind!r}")


def evaluate_predictor(m: models.TrainedModel, test: Dataset, repeats: int = 3) -> tuple[np.ndarray, EvalReport]:
    """Scores on the test split.

    ``seconds_per_envelope`` is the batch prediction time over the test split
    divided by its size; the one-envelope-at-a-time latency goes in ``extra``.
    """
    pred = models.predict_many(m, test.features)
    batch = timing_harness(lambda: models.predict_many(m, test.features), repeats=repeats, per=len(test))
    _, single = models.timed_predict(m, test.features)
    rep = evaluate(m.kind, pred, test.targets, batch.mean,
                   single_seconds=float(single.mean()), chosen=m.chosen)
    return pred, rep


@dataclass
class ApproxResult:
    kind: str
    models: list
    reconstructed: np.ndarray  # [n, lead, power]
    rss: np.ndarray  # per envelope
    seconds: np.ndarray
    converged: np.ndarray

    def row(self, truth: np.ndarray, lead_grid, K: int) -> ApproxRow:
        n_params = parameter_count(self.kind, lead_grid, K)
        return ApproxRow(APPROX_LABELS[self.kind], n_params, wire.RAW_PARAMETERS / n_params,
                         mae(self.reconstructed, truth), r2(self.reconstructed, truth),
                         float(self.rss.mean()), float(self.seconds.mean()))


def approximate(envs: list[FlexibilityEnvelope], kinds, K: int = 18) -> dict[str, ApproxResult]:
    """Fit every approximator to every envelope. SND is warm-started from the ND fit."""
    out = {}
    nd_cache: list = [None] * len(envs)
    order = sorted(kinds, key=lambda k: ("nd", "snd", "gmm").index(k))
    for kind in order:
        fitted, recon, rss, secs, conv = [], [], [], [], []
        for i, env in enumerate(envs):
            t = time.perf_counter()
            if kind == "gmm":
                mdl, rep = APPROXIMATORS["gmm"](env, K)
            elif kind == "snd":
                if nd_cache[i] is None:
                    nd_cache[i], _ = APPROXIMATORS["nd"](env)
                mdl, rep = APPROXIMATORS["snd"](env, nd_cache[i])
            else:
                mdl, rep = APPROXIMATORS["nd"](env)
                nd_cache[i] = mdl
            secs.append(time.perf_counter() - t)
            if kind == "snd" and "nd" in out:
                secs[-1] += out["nd"].seconds[i]  # the SND fit includes its ND warm start
            fitted.append(mdl)
            recon.append(reconstruct(mdl).durations)
            rss.append(fit_rss(mdl, env))
            conv.append(rep.converged)
        out[kind] = ApproxResult(kind, fitted, np.stack(recon), np.array(rss), np.array(secs), np.array(conv))
    return out


def transmit(model) -> object:
    """Encode a fitted surface into a wire frame and decode it on the receiving side."""
    frame = wire.encode(model)
    back = wire.decode(frame, horizon=model.lead_grid.horizon)
    if wire.encode(back) != frame:
        raise InvariantViolation("wire roundtrip is not bit-exact")
    return back


def combine(pred: np.ndarray, like: Dataset, approximator: str = "snd", K: int = 18) -> tuple[np.ndarray, int]:
    """Approximate predicted envelopes, send them over the wire, and rebuild them.

    Returns the reconstructed durations and the total number of bytes sent.
    """
    envs = [FlexibilityEnvelope(like.power_grid, like.lead_grid, D, float(t)) for D, t in zip(pred, like.timestamps)]
    res = approximate(envs, [approximator], K)[approximator]
    recon, sent = [], 0
    for mdl in res.models:
        back = transmit(mdl)
        sent += wire.frame_length(mdl.lead_grid.size, int(np.size(mdl.params)))
        recon.append(reconstruct(back).durations)
    return np.stack(recon), sent


@dataclass
class PipelineResult:
    config: PipelineConfig
    train_size: int
    test_size: int
    oracle_seconds: float
    predictor_reports: dict[str, EvalReport]
    approx_rows: list[ApproxRow]
    approx_reports: dict[str, EvalReport]
    nesting: np.ndarray | None  # per test envelope: SND RSS <= ND RSS
    combined: EvalReport | None
    checks: dict[str, bool] = field(default_factory=dict)
    written: list[Path] = field(default_factory=list)

    def failed_checks(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def _checks(res: PipelineResult, predictor: str) -> dict[str, bool]:
    out = {}
    reps = res.predictor_reports
    if predictor in reps:
        p = reps[predictor]
        out["prediction_faster_than_oracle"] = p.seconds_per_envelope < res.oracle_seconds
        for other in ("benchmark", "lasso"):
            if other in reps and other != predictor:
                o = reps[other]
                out[f"{predictor}_beats_{other}_mae"] = p.mae_minutes < o.mae_minutes
                out[f"{predictor}_beats_{other}_r2"] = p.r2.value > o.r2.value
    if res.nesting is not None:
        out["snd_rss_le_nd_every_envelope"] = bool(res.nesting.all())
    if res.approx_rows:
        counts = {r.approximator: r.parameters for r in res.approx_rows}
        if "3D-GMM" in counts:
            out["gmm_fewest_parameters"] = all(counts["3D-GMM"] < c for k, c in counts.items() if k != "3D-GMM")
    if res.combined is not None and predictor in reps:
        approx = res.combined.extra["approximator"]
        bound = reps[predictor].mae_minutes + res.approx_reports[approx].mae_minutes
        out["combined_mae_subadditive"] = res.combined.mae_minutes <= bound
    return out


def checks_csv(checks: dict[str, bool]) -> str:
    return csv_text(["check", "passed"], [[k, int(v)] for k, v in checks.items()])


def run_pipeline(cfg: PipelineConfig, predictor: str = "adaboost", approximator: str = "snd",
                 out_dir=None) -> PipelineResult:
    """Run the whole workflow and write the report CSVs to ``out_dir`` (or ``cfg.out_dir``)."""
    out = Path(out_dir or cfg.out_dir)
    kinds = list(dict.fromkeys([*cfg.predictors, predictor]))
    approx_kinds = list(dict.fromkeys([*cfg.approximators, approximator]))

    t = time.perf_counter()
    _, q, data = build_dataset(cfg)
    train, test = split(data, cfg)
    oracle = float(np.mean(q.seconds))
    log.info("quantified %d envelopes in %.1fs (%.4fs each)", len(data), time.perf_counter() - t, oracle)

    reports, preds = {}, {}
    for kind in kinds:
        t = time.perf_counter()
        m = fit_predictor(kind, train, cfg)
        preds[kind], reports[kind] = evaluate_predictor(m, test)
        log.info("%s: fit %.1fs, MAE %.2f min, R2 %.4f", kind, time.perf_counter() - t,
                 reports[kind].mae_minutes, reports[kind].r2.value)

    truth_envs = test.envelopes()
    approx = approximate(truth_envs, approx_kinds, cfg.gmm_components)
    rows = [approx[k].row(test.targets, test.lead_grid, cfg.gmm_components) for k in approx]
    approx_reports = {k: evaluate(APPROX_LABELS[k], a.reconstructed, test.targets, float(a.seconds.mean()))
                      for k, a in approx.items()}
    nesting = None
    if "nd" in approx and "snd" in approx:
        nesting = approx["snd"].rss <= approx["nd"].rss
    for r in rows:
        log.info("%s: %d params, MAE %.2f min, R2 %.4f", r.approximator, r.parameters, r.mae_minutes, r.r2.value)

    recon, sent = combine(preds[predictor], test, approximator, cfg.gmm_components)
    combined = evaluate(f"{predictor}+{approximator}", recon, test.targets, approximator=approximator,
                        bytes_sent=sent)
    log.info("combined: MAE %.2f min, R2 %.4f", combined.mae_minutes, combined.r2.value)

    res = PipelineResult(cfg, len(train), len(test), oracle, reports, rows, approx_reports, nesting, combined)
    res.checks = _checks(res, predictor)

    ranked = sorted((r for k, r in reports.items() if k != "benchmark"), key=lambda r: r.mae_minutes)
    best_approx = min(approx_reports.values(), key=lambda r: r.mae_minutes)
    table3 = [("benchmark", reports["benchmark"])] if "benchmark" in reports else []
    if ranked:
        table3.append(("best predictor", ranked[0]))
    table3 += [("best approximator", best_approx), ("combination", combined)]
    res.written = write_reports(out, test.power_grid, list(reports.values()), rows, table3, oracle)
    for name, text in (("checks.csv", checks_csv(res.checks)), ("config.txt", config_to_text(cfg))):
        atomic_write_text(out / name, text)
        res.written.append(out / name)
    return res
