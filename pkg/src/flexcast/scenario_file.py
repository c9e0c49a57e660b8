"""Plain-text scenario files: key-value sections followed by one CSV series block.

    # flexcast-scenario 1
    [scenario]
    days = 7
    ...
    [component battery]
    kind = battery
    p_max_charge = 5.0
    ...
    [series]
    step,irradiance,temperature,...,ev.availability,ev.drain
    0,0.0,3.1,...
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from flexcast.building import BuildingScenario, ComponentSpec, InvalidScenarioError
from flexcast.io import atomic_write_text

MAGIC = "# flexcast-scenario 1"
SERIES = ("irradiance", "temperature", "presence", "nonflex_load", "water_draw")


def _fmt(x: float) -> str:
    return repr(float(x))


def scenario_to_text(s: BuildingScenario) -> str:
    out = [MAGIC, "[scenario]"]
    for key in ("days", "horizon", "seed", "start_weekday"):
        out.append(f"{key} = {getattr(s, key)}")
    extra_cols = []
    for c in s.components:
        out.append("")
        out.append(f"[component {c.name}]")
        out.append(f"kind = {c.kind}")
        for key in ("p_max_charge", "p_max_discharge", "capacity", "initial_state"):
            out.append(f"{key} = {_fmt(getattr(c, key))}")
        if c.comfort_band is not None:
            out.append("comfort_band = " + ",".join(_fmt(v) for v in c.comfort_band))
        if c.thermal_params is not None:
            out.append("thermal_params = " + ",".join(_fmt(v) for v in c.thermal_params))
        for attr in ("availability", "drain"):
            if getattr(c, attr) is not None:
                extra_cols.append((f"{c.name}.{attr}", getattr(c, attr)))
    out += ["", "[series]"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", *SERIES, *(name for name, _ in extra_cols)])
    cols = [getattr(s, name) for name in SERIES] + [arr for _, arr in extra_cols]
    for k in range(s.n_steps):
        w.writerow([k, *(_fmt(col[k]) for col in cols)])
    return "\n".join(out) + "\n" + buf.getvalue()


def scenario_from_text(text: str) -> BuildingScenario:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise InvalidScenarioError("not a flexcast scenario file")
    sections: list[tuple[str, dict]] = []
    series_start = None
    for i, raw in enumerate(lines[1:], start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[series]":
            series_start = i + 1
            break
        if line.startswith("[") and line.endswith("]"):
            sections.append((line[1:-1], {}))
            continue
        if "=" not in line or not sections:
            raise InvalidScenarioError(f"line {i + 1}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        sections[-1][1][k] = v
    if series_start is None:
        raise InvalidScenarioError("scenario file has no [series] block")
    rows = list(csv.reader(lines[series_start:]))
    header, body = rows[0], [r for r in rows[1:] if r]
    data = np.array(body, dtype=float)
    col = {name: data[:, j] for j, name in enumerate(header)}

    meta = dict(sections[0][1]) if sections and sections[0][0] == "scenario" else {}
    comps = []
    for title, kv in sections:
        if not title.startswith("component "):
            continue
        name = title.split(" ", 1)[1]
        pair = lambda key: tuple(float(x) for x in kv[key].split(",")) if key in kv else None  # noqa: E731
        comps.append(
            ComponentSpec(
                kind=kv["kind"],
                name=name,
                p_max_charge=float(kv.get("p_max_charge", 0)),
                p_max_discharge=float(kv.get("p_max_discharge", 0)),
                capacity=float(kv.get("capacity", 0)),
                initial_state=float(kv.get("initial_state", 0)),
                comfort_band=pair("comfort_band"),
                thermal_params=pair("thermal_params"),
                availability=col.get(f"{name}.availability"),
                drain=col.get(f"{name}.drain"),
            )
        )
    return BuildingScenario(
        components=tuple(comps),
        **{name: col[name] for name in SERIES},
        days=int(meta.get("days", 1)),
        horizon=int(meta.get("horizon", 1440)),
        seed=int(meta.get("seed", 0)),
        start_weekday=int(meta.get("start_weekday", 0)),
    )


def write_scenario(s: BuildingScenario, path) -> None:
    atomic_write_text(Path(path), scenario_to_text(s))


def read_scenario(path) -> BuildingScenario:
    return scenario_from_text(Path(path).read_text())
