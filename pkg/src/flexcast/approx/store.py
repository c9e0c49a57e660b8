"""Human-readable JSON files for fitted surface models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from flexcast.approx.lm import FitReport
from flexcast.approx.surfaces import Gmm3D, Normal2DSum, SkewNormal2DSum
from flexcast.envelope import LeadTimeGrid, PowerGrid
from flexcast.io import atomic_write_text

FORMAT = "flexcast-surface"
FORMAT_VERSION = 1
_CLASSES = {1: Normal2DSum, 2: SkewNormal2DSum, 3: Gmm3D}
_NAMES = {1: "2D-ND", 2: "2D-SND", 3: "3D-GMM"}


class SurfaceFileError(ValueError):
    pass


def surface_to_dict(model, report: FitReport | None = None) -> dict:
    pg, lg = model.power_grid, model.lead_grid
    out = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "model": _NAMES[model.model_id],
        "model_id": model.model_id,
        "power_grid": [pg.p_min, pg.p_max, pg.step],
        "lead_offsets": list(lg.offsets),
        "horizon": lg.horizon,
        "params": np.asarray(model.params, dtype=float).tolist(),
    }
    if report is not None:
        out["fit"] = {"rss": report.rss, "iterations": report.iterations, "converged": report.converged,
                      "seconds": report.seconds}
    return out


def surface_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise SurfaceFileError("not a flexcast surface file")
    if d.get("format_version") != FORMAT_VERSION:
        raise SurfaceFileError(f"surface format version {d.get('format_version')} != {FORMAT_VERSION}")
    cls = _CLASSES.get(d.get("model_id"))
    if cls is None:
        raise SurfaceFileError(f"unknown model id {d.get('model_id')}")
    pg = PowerGrid(*d["power_grid"])
    lg = LeadTimeGrid(tuple(d["lead_offsets"]), d["horizon"])
    params = np.array(d["params"], dtype=float)
    width = 5 if cls is Gmm3D else cls.per_slice
    if params.ndim != 2 or params.shape[1] != width or (cls is not Gmm3D and len(params) != lg.size):
        raise SurfaceFileError(f"parameter block of shape {params.shape} does not fit {_NAMES[cls.model_id]}")
    return cls(pg, lg, params)


def write_surface(model, path, report: FitReport | None = None) -> None:
    # json writes floats with repr, so values survive a roundtrip exactly
    atomic_write_text(Path(path), json.dumps(surface_to_dict(model, report), indent=1) + "\n")


def read_surface(path):
    try:
        return surface_from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SurfaceFileError(f"{path}: {exc}") from exc
