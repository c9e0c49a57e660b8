"""Pipeline configuration read from a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Keys prefixed with ``gen.`` set
fields of :class:`~flexcast.building.GeneratorConfig`. Lists are written
comma-separated; ``none`` stands for an unlimited tree depth.

Documented keys:

    days, seed, cadence, test_hours, folds, jobs, out_dir
    predictors        benchmark,lasso,knn,svr,adaboost (any subset)
    approximators     nd,snd,gmm
    gmm_components    K for the 3D GMM
    lead_stride       tune expensive families on every n-th lead time
    sampling          AdaBoost.R2 weak-learner training: bootstrap | weighted
    lasso_grid, knn_grid, svr_grid, adaboost_estimators, adaboost_depths, benchmark_grid
    gen.<field>       any generator field, e.g. gen.temp_mean = 3
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from flexcast.building import STEP_MIN, GeneratorConfig
from flexcast.ml import models

PREDICTOR_KINDS = models.KINDS
APPROXIMATOR_KINDS = ("nd", "snd", "gmm")
SEED_ENV = "FLEXCAST_SEED"


class ConfigError(ValueError):
    pass


# Generator settings used by the pipeline unless overridden. They add
# commuting noise and a heavier thermal mass to the bare generator defaults;
# see scripts/calibrate_generator.py.
PIPELINE_GENERATOR = {
    "days": 12,
    "home_office_prob": 0.3,
    "ev_trip_kwh": (5.0, 35.0),
    "ev_leave_h": (8.0, 1.0),
    "ev_back_h": (17.5, 1.5),
    "sh_gain": 15.0,
    "sh_loss": 0.01,
    "temp_mean": 3.0,
}


@dataclass
class PipelineConfig:
    seed: int = 0
    cadence: int = STEP_MIN
    test_hours: float = 24.0
    folds: int = 5
    jobs: int = 1
    out_dir: str = "flexcast_out"
    predictors: tuple[str, ...] = ("benchmark", "lasso", "adaboost")
    approximators: tuple[str, ...] = ("nd", "snd", "gmm")
    gmm_components: int = 18
    lead_stride: int = 11
    sampling: str = "bootstrap"
    lasso_grid: tuple = models.LASSO_GRID
    knn_grid: tuple = models.KNN_GRID
    svr_grid: tuple = models.SVR_GRID
    adaboost_estimators: tuple = models.ADABOOST_ESTIMATORS
    adaboost_depths: tuple = models.ADABOOST_DEPTHS
    benchmark_grid: tuple = models.BENCHMARK_GRID
    generator: GeneratorConfig = field(default_factory=lambda: GeneratorConfig(**PIPELINE_GENERATOR))

    def __post_init__(self):
        self.validate()

    @property
    def days(self) -> int:
        return self.generator.days

    @property
    def test_steps(self) -> int:
        return int(round(self.test_hours * 60 / self.cadence))

    def validate(self) -> None:
        if self.cadence <= 0 or self.cadence % STEP_MIN:
            raise ConfigError(f"cadence must be a positive multiple of {STEP_MIN} min")
        if not self.test_hours > 0:
            raise ConfigError("test_hours must be positive")
        if self.test_steps * self.cadence != self.test_hours * 60:
            raise ConfigError("test_hours must be a whole number of cadence steps")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.gmm_components < 1:
            raise ConfigError("gmm_components must be at least 1")
        if self.lead_stride < 1:
            raise ConfigError("lead_stride must be at least 1")
        if self.sampling not in ("bootstrap", "weighted"):
            raise ConfigError(f"unknown sampling {self.sampling!r}")
        for kind in self.predictors:
            if kind not in PREDICTOR_KINDS:
                raise ConfigError(f"unknown predictor {kind!r}")
        for kind in self.approximators:
            if kind not in APPROXIMATOR_KINDS:
                raise ConfigError(f"unknown approximator {kind!r}")
        for name in ("lasso_grid", "knn_grid", "svr_grid", "adaboost_estimators", "adaboost_depths", "benchmark_grid"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        try:
            self.generator.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with top-level fields replaced; ``days`` and ``gen_*`` reach the generator."""
        gen = {}
        if "days" in overrides:
            gen["days"] = overrides.pop("days")
        for key in [k for k in overrides if k.startswith("gen_")]:
            gen[key[4:]] = overrides.pop(key)
        out = dataclasses.replace(self, **overrides)
        if gen:
            out = dataclasses.replace(out, generator=_replace_generator(out.generator, gen))
        return out


def _replace_generator(g: GeneratorConfig, values: dict) -> GeneratorConfig:
    known = {f.name: f for f in dataclasses.fields(GeneratorConfig)}
    for k in values:
        if k not in known:
            raise ConfigError(f"unknown generator field {k!r}")
    return dataclasses.replace(g, **values)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _number(text: str):
    if text.lower() == "none":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def _coerce(text: str, like):
    """Parse ``text`` into the type of the existing value ``like``."""
    if isinstance(like, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    if isinstance(like, tuple):
        items = _split(text)
        if like and all(isinstance(x, str) for x in like):
            return tuple(items)
        return tuple(_number(x) for x in items)
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    top: dict = {}
    gen: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("gen."):
                name = key[4:]
                if not hasattr(base.generator, name):
                    raise ConfigError(f"line {n}: unknown generator field {name!r}")
                gen[name] = _coerce(value, getattr(base.generator, name))
            elif key == "days":
                gen["days"] = int(value)
            elif key in {f.name for f in dataclasses.fields(PipelineConfig)} and key != "generator":
                top[key] = _coerce(value, getattr(base, key))
            else:
                raise ConfigError(f"line {n}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {n}: bad value for {key}: {value!r}") from exc
    try:
        generator = _replace_generator(base.generator, gen)
        return dataclasses.replace(base, generator=generator, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, base: PipelineConfig | None = None) -> PipelineConfig:
    if path is None:
        return base or PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config_text(p.read_text(), base)


def config_to_text(cfg: PipelineConfig) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join("none" if x is None else str(x) for x in v)
        return str(v)

    lines = []
    for f in dataclasses.fields(PipelineConfig):
        if f.name != "generator":
            lines.append(f"{f.name} = {fmt(getattr(cfg, f.name))}")
    for f in dataclasses.fields(GeneratorConfig):
        lines.append(f"gen.{f.name} = {fmt(getattr(cfg.generator, f.name))}")
    return "\n".join(lines) + "\n"


def seed_from_env(default: int = 0) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from exc
