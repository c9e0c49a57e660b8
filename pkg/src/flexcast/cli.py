"""Command-line driver: one subcommand per workflow stage plus ``pipeline``.

Exit codes:
    0  success
    1  unexpected error
    2  bad arguments or configuration
    3  missing input artifact
    4  artifact schema or format version mismatch
    5  model or grid mismatch between artifacts
    6  a produced artifact failed its own checks
    7  corrupt or truncated wire frame
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from flexcast import wire
from flexcast.approx import store
from flexcast.approx.surfaces import APPROXIMATORS, fit_rss, reconstruct
from flexcast.building import FEATURE_NAMES, ScenarioError, extract_features, generate_scenario, quantify_series
from flexcast.config import APPROXIMATOR_KINDS, PREDICTOR_KINDS, ConfigError, PipelineConfig, load_config, seed_from_env
from flexcast.envelope import EnvelopeError, FlexibilityEnvelope, GridMismatchError, read_envelope_csv, write_envelope_csv
from flexcast.io import atomic_write_bytes, atomic_write_text
from flexcast.metrics import MetricError, evaluate, write_reports
from flexcast.ml import models
from flexcast.ml.data import Dataset, DatasetError, read_dataset, write_dataset
from flexcast.scenario_file import read_scenario, write_scenario

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA, EXIT_MISMATCH, EXIT_INVARIANT, EXIT_FRAME = range(8)

log = logging.getLogger("flexcast")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"missing artifact: {p}", EXIT_MISSING)
    return p


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    elif args.config is None:
        over["seed"] = seed_from_env(cfg.seed)
    if args.jobs is not None:
        over["jobs"] = args.jobs
    if getattr(args, "days", None) is not None:
        over["days"] = args.days
    return cfg.updated(**over) if over else cfg


def _load_dataset(path) -> Dataset:
    try:
        d, _ = read_dataset(_need(path))
    except FileNotFoundError as exc:
        raise CliError(f"missing artifact: {exc}", EXIT_MISSING) from exc
    return d


def _test_mask(d: Dataset, cfg: PipelineConfig) -> np.ndarray:
    order = np.argsort(d.timestamps, kind="stable")
    mask = np.zeros(len(d), dtype=bool)
    mask[order[-cfg.test_steps:]] = True
    return mask


def _select(d: Dataset, split: str, cfg: PipelineConfig) -> Dataset:
    if split == "all":
        return d
    if len(d) <= cfg.test_steps:
        raise CliError(f"dataset has {len(d)} samples, the test split alone needs {cfg.test_steps}", EXIT_USAGE)
    mask = _test_mask(d, cfg)
    return d.subset(np.flatnonzero(mask if split == "test" else ~mask))


# --- subcommands -----------------------------------------------------------------


def cmd_gen(args, cfg: PipelineConfig) -> int:
    s = generate_scenario(cfg.generator, seed=cfg.seed)
    write_scenario(s, args.out)
    log.info("wrote %d-day scenario to %s", s.days, args.out)
    return EXIT_OK


def cmd_quantify(args, cfg: PipelineConfig) -> int:
    s = read_scenario(_need(args.scenario))
    q = quantify_series(s, cadence=args.cadence or cfg.cadence, jobs=cfg.jobs,
                        include_weekends=args.include_weekends)
    F = np.array([extract_features(s, t0) for t0 in q.instants])
    out = Path(args.out)
    write_dataset(Dataset.from_envelopes(F, q.envelopes), out, FEATURE_NAMES)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "timestamp_min", "seconds"])
    for i, (t0, sec) in enumerate(zip(q.instants, q.seconds)):
        w.writerow([i, t0, f"{sec:.6f}"])
    atomic_write_text(out / "timing.csv", buf.getvalue())
    log.info("quantified %d envelopes, %.4f s each", len(q), float(np.mean(q.seconds)))
    return EXIT_OK


def cmd_train(args, cfg: PipelineConfig) -> int:
    from flexcast.pipeline import fit_predictor

    d = _select(_load_dataset(args.dataset), args.split, cfg)
    out = Path(args.out)
    for kind in args.model or ["adaboost"]:
        t = time.perf_counter()
        m = fit_predictor(kind, d, cfg)
        models.save_model(m, out / f"{kind}.npz")
        log.info("trained %s on %d samples in %.1fs", kind, len(d), time.perf_counter() - t)
    return EXIT_OK


def _load_model(path) -> models.TrainedModel:
    try:
        return models.load_model(_need(path))
    except models.SchemaVersionError as exc:
        raise CliError(str(exc), EXIT_SCHEMA) from exc
    except (models.ModelError, ValueError, OSError) as exc:
        raise CliError(f"cannot read model {path}: {exc}", EXIT_SCHEMA) from exc


def cmd_predict(args, cfg: PipelineConfig) -> int:
    m = _load_model(args.model)
    d = _select(_load_dataset(args.dataset), args.split, cfg)
    if d.features.shape[1] != m.n_features:
        raise CliError(f"model expects {m.n_features} features, dataset has {d.features.shape[1]}", EXIT_MISMATCH)
    if d.power_grid != m.power_grid or d.lead_grid != m.lead_grid:
        raise CliError("model and dataset use different envelope grids", EXIT_MISMATCH)
    t = time.perf_counter()
    D = models.predict_many(m, d.features)
    per = (time.perf_counter() - t) / len(d)
    write_dataset(Dataset(d.features, D, d.timestamps, d.power_grid, d.lead_grid), args.out, FEATURE_NAMES)
    atomic_write_text(Path(args.out) / "timing.csv", f"model,seconds_per_envelope\n{m.kind},{per:.6f}\n")
    log.info("predicted %d envelopes with %s, %.6f s each", len(d), m.kind, per)
    return EXIT_OK


def cmd_approx(args, cfg: PipelineConfig) -> int:
    env = read_envelope_csv(_need(args.envelope))
    if args.model == "gmm":
        mdl, rep = APPROXIMATORS["gmm"](env, args.components or cfg.gmm_components)
    else:
        mdl, rep = APPROXIMATORS[args.model](env)
    store.write_surface(mdl, args.out, rep)
    log.info("%s: RSS %.1f, %d iterations, converged=%s", args.model, fit_rss(mdl, env), rep.iterations,
             rep.converged)
    return EXIT_OK


def cmd_encode(args, cfg: PipelineConfig) -> int:
    src = _need(args.input)
    if src.suffix == ".json":
        obj = store.read_surface(src)
    else:
        obj = read_envelope_csv(src)
    frame = wire.encode(obj)
    atomic_write_bytes(Path(args.out), frame)
    if args.hexdump:
        print(wire.hexdump(frame))
    log.info("wrote %d-byte frame", len(frame))
    return EXIT_OK


def cmd_decode(args, cfg: PipelineConfig) -> int:
    frame = _need(args.frame).read_bytes()
    obj = wire.decode(frame, horizon=args.horizon)
    out = Path(args.out)
    if isinstance(obj, FlexibilityEnvelope):
        if out.suffix == ".json":
            raise CliError("a raw envelope frame decodes to CSV, not a surface file", EXIT_USAGE)
        write_envelope_csv(obj, out)
    elif out.suffix == ".json":
        store.write_surface(obj, out)
    else:
        write_envelope_csv(reconstruct(obj), out)
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    pred = _load_dataset(args.predictions)
    truth = _load_dataset(args.truth)
    if pred.power_grid != truth.power_grid or pred.lead_grid != truth.lead_grid:
        raise CliError("prediction and truth grids differ", EXIT_MISMATCH)
    idx = {float(t): i for i, t in enumerate(truth.timestamps)}
    missing = [t for t in pred.timestamps if float(t) not in idx]
    if missing:
        raise CliError(f"{len(missing)} predicted instants have no ground truth", EXIT_MISMATCH)
    T = truth.targets[[idx[float(t)] for t in pred.timestamps]]
    secs = float("nan")
    timing = Path(args.predictions) / "timing.csv"
    if timing.exists():
        rows = list(csv.DictReader(timing.read_text().splitlines()))
        if rows and "seconds_per_envelope" in rows[0]:
            secs = float(rows[0]["seconds_per_envelope"])
    rep = evaluate(args.name, pred.targets, T, secs)
    write_reports(args.out, truth.power_grid, [rep])
    print(f"{rep.model}: MAE {rep.mae_minutes:.3f} min, R2 {'undefined' if not rep.r2.defined else f'{rep.r2.value:.6f}'}")
    return EXIT_OK


def cmd_pipeline(args, cfg: PipelineConfig) -> int:
    from flexcast.pipeline import run_pipeline

    over = {}
    if args.lead_stride is not None:
        over["lead_stride"] = args.lead_stride
    if args.predictors:
        over["predictors"] = tuple(args.predictors)
    cfg = cfg.updated(**over) if over else cfg
    res = run_pipeline(cfg, args.predictor, args.approximator, args.out)
    for name, rep in res.predictor_reports.items():
        print(f"{name:10s} MAE {rep.mae_minutes:7.2f} min  R2 {rep.r2.value:.4f}  {rep.seconds_per_envelope:.6f} s/env")
    print(f"{'oracle':10s} {res.oracle_seconds:.6f} s/env")
    for row in res.approx_rows:
        print(f"{row.approximator:10s} {row.parameters:4d} params  MAE {row.mae_minutes:7.2f} min  R2 {row.r2.value:.4f}")
    c = res.combined
    print(f"{c.model:10s} MAE {c.mae_minutes:7.2f} min  R2 {c.r2.value:.4f}")
    for name, ok in res.checks.items():
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
    print(f"reports in {Path(args.out or cfg.out_dir)}")
    return EXIT_INVARIANT if res.failed_checks() else EXIT_OK


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="run seed (falls back to FLEXCAST_SEED)")
    common.add_argument("--jobs", type=int, help="worker processes for quantification")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="flexcast", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog="\n".join(__doc__.splitlines()[2:]))
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic building scenario")
    g.add_argument("--days", type=int)
    g.add_argument("--out", default="scenario.txt")
    g.set_defaults(func=cmd_gen)

    q = sub.add_parser("quantify", parents=[common], help="quantify envelopes at every cadence tick")
    q.add_argument("scenario")
    q.add_argument("--cadence", type=int)
    q.add_argument("--include-weekends", action="store_true")
    q.add_argument("--out", default="dataset")
    q.set_defaults(func=cmd_quantify)

    t = sub.add_parser("train", parents=[common], help="fit envelope predictors")
    t.add_argument("dataset")
    t.add_argument("--model", action="append", choices=PREDICTOR_KINDS)
    t.add_argument("--split", choices=("train", "all"), default="train",
                   help="train: hold out the final test_hours of the dataset")
    t.add_argument("--out", default="models")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="predict envelopes from a dataset's features")
    pr.add_argument("model")
    pr.add_argument("dataset")
    pr.add_argument("--split", choices=("test", "all"), default="test")
    pr.add_argument("--out", default="predictions")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("approx", parents=[common], help="fit a surface model to one envelope CSV")
    a.add_argument("envelope")
    a.add_argument("--model", choices=APPROXIMATOR_KINDS, default="snd")
    a.add_argument("--components", type=int, help="GMM components")
    a.add_argument("--out", default="surface.json")
    a.set_defaults(func=cmd_approx)

    e = sub.add_parser("encode", parents=[common], help="encode an envelope CSV or surface JSON as a frame")
    e.add_argument("input")
    e.add_argument("--out", default="frame.bin")
    e.add_argument("--hexdump", action="store_true")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", parents=[common], help="decode a frame to an envelope CSV or surface JSON")
    d.add_argument("frame")
    d.add_argument("--horizon", type=int, default=1440)
    d.add_argument("--out", default="decoded.csv")
    d.set_defaults(func=cmd_decode)

    ev = sub.add_parser("eval", parents=[common], help="score predicted envelopes against ground truth")
    ev.add_argument("predictions")
    ev.add_argument("truth")
    ev.add_argument("--name", default="model")
    ev.add_argument("--out", default="reports")
    ev.set_defaults(func=cmd_eval)

    pl = sub.add_parser("pipeline", parents=[common], help="run the whole workflow and write all reports")
    pl.add_argument("--days", type=int)
    pl.add_argument("--predictor", choices=PREDICTOR_KINDS, default="adaboost")
    pl.add_argument("--approximator", choices=APPROXIMATOR_KINDS, default="snd")
    pl.add_argument("--predictors", nargs="+", choices=PREDICTOR_KINDS, help="models for table1")
    pl.add_argument("--lead-stride", type=int)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except CliError as exc:
        print(f"flexcast: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ScenarioError) as exc:
        print(f"flexcast: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (wire.WireError, store.SurfaceFileError) as exc:
        print(f"flexcast: bad frame or surface file: {exc}", file=sys.stderr)
        return EXIT_FRAME
    except GridMismatchError as exc:
        print(f"flexcast: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except models.SchemaVersionError as exc:
        print(f"flexcast: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DatasetError, EnvelopeError, MetricError) as exc:
        print(f"flexcast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"flexcast: missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
