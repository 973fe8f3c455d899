"""Experiment configuration: a TOML file with fixed sections and strict keys.

Grammar (every section except ``[grid]`` and ``[form]`` is optional)::

    [grid]
    dim = 3                  # 2..4
    N = 32                   # int, or one int per axis (>= 8)
    L = 1.0                  # float, or one float per axis

    [scenario]
    name = "conformal_perturbation"
    eps = 0.05               # remaining keys are scenario parameters
    modes = [1, 1, 1]

    [form]
    degree = 2
    kind = "fourier_mode"    # fourier_mode | closed | random
    component = [0, 1]       # remaining keys are form parameters

    [run]
    t_end = 0.01
    cfl = 0.2
    max_steps = 1000000
    record_every = 1
    spd_floor = 1e-8
    seed = 0

    [output]
    dir = "out"
    csv = "series.csv"
    summary = "summary.json"

    [tolerances]
    monotone_abs = 1e-8
    monotone_rel = 1e-6
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import tomli

from .grid import MIN_POINTS, GridSpec
from .scenarios import CATALOG, FORM_KEYS, SCENARIO_KEYS

SECTIONS = {
    "grid": {"dim", "N", "L"},
    "scenario": {"name"},  # plus scenario parameters
    "form": {"degree", "kind"},  # plus form parameters
    "run": {"t_end", "cfl", "max_steps", "record_every", "spd_floor", "seed"},
    "output": {"dir", "csv", "summary"},
    "tolerances": {"monotone_abs", "monotone_rel"},
}
REQUIRED_SECTIONS = ("grid", "form")


class ConfigError(ValueError):
    """Parse or validation failure.

    ``field`` names the offending setting for validation errors; ``line`` and
    ``column`` locate syntax errors.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        prefix = f"{field}: " if field else ""
        super().__init__(prefix + message + where)
        self.field = field
        self.line = line
        self.column = column


class ConfigReadError(ConfigError):
    """The config file could not be read at all."""


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int
    points: tuple[int, ...]
    periods: tuple[float, ...]
    scenario: str
    scenario_params: dict[str, Any]
    form_degree: int
    form_kind: str
    form_params: dict[str, Any]
    t_end: float = 0.01
    cfl: float = 0.2
    max_steps: int = 1_000_000
    record_every: int = 1
    spd_floor: float = 1e-8
    seed: int = 0
    out_dir: str = "out"
    csv_name: str = "series.csv"
    summary_name: str = "summary.json"
    monotone_abs: float = 1e-8
    monotone_rel: float = 1e-6
    source: str | None = field(default=None, compare=False)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.points, self.periods)

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=_integer("run.seed", seed, 0))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        return cfg

    def as_dict(self) -> dict:
        """Nested echo in the file layout, suitable for the run summary."""
        d = asdict(self)
        return {
            "grid": {"dim": d["dim"], "N": list(d["points"]), "L": list(d["periods"])},
            "scenario": {"name": d["scenario"], **d["scenario_params"]},
            "form": {"degree": d["form_degree"], "kind": d["form_kind"], **d["form_params"]},
            "run": {k: d[k] for k in ("t_end", "cfl", "max_steps", "record_every", "spd_floor", "seed")},
            "output": {"dir": d["out_dir"], "csv": d["csv_name"], "summary": d["summary_name"]},
            "tolerances": {"monotone_abs": d["monotone_abs"], "monotone_rel": d["monotone_rel"]},
        }


def _integer(name, v, lo=None, hi=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", name)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        bounds = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        raise ConfigError(f"{v} outside {bounds}", name)
    return v


def _number(name, v, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {v!r}", name)
    if positive and v <= 0:
        raise ConfigError(f"must be > 0, got {v}", name)
    if nonneg and v < 0:
        raise ConfigError(f"must be >= 0, got {v}", name)
    return float(v)


def _string(name, v) -> str:
    if not isinstance(v, str) or not v:
        raise ConfigError(f"expected a non-empty string, got {v!r}", name)
    return v


def _per_axis(name, v, dim, conv):
    if isinstance(v, list):
        if len(v) != dim:
            raise ConfigError(f"expected {dim} entries, got {len(v)}", name)
        return tuple(conv(name, x) for x in v)
    return (conv(name, v),) * dim


def parse_toml(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigError(re.sub(r"\s*\(at line \d+, column \d+\)", "", msg), None, line, col) from exc


def validate(raw: dict, source: str | None = None) -> ExperimentConfig:
    for key, val in raw.items():
        if key not in SECTIONS:
            raise ConfigError("unknown section", key)
        if not isinstance(val, dict):
            raise ConfigError("expected a [section] table", key)
    for sec in REQUIRED_SECTIONS:
        if sec not in raw:
            raise ConfigError("missing section", sec)

    grid = dict(raw["grid"])
    for key in grid:
        if key not in SECTIONS["grid"]:
            raise ConfigError("unknown key", f"grid.{key}")
    if "dim" not in grid or "N" not in grid:
        raise ConfigError("grid.dim and grid.N are required", "grid")
    dim = _integer("grid.dim", grid["dim"], 2, 4)
    points = _per_axis("grid.N", grid["N"], dim, lambda n, v: _integer(n, v, MIN_POINTS))
    periods = _per_axis("grid.L", grid.get("L", 1.0), dim, lambda n, v: _number(n, v, positive=True))

    scen = dict(raw.get("scenario", {"name": "flat_torus"}))
    name = _string("scenario.name", scen.pop("name", "flat_torus"))
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(CATALOG))}", "scenario.name")
    for key in scen:
        if key not in SCENARIO_KEYS[name]:
            raise ConfigError(f"unknown key for scenario {name}", f"scenario.{key}")

    form = dict(raw["form"])
    if "degree" not in form:
        raise ConfigError("form degree is required", "form_degree")
    p = form.pop("degree")
    if isinstance(p, bool) or not isinstance(p, int) or p < 0:
        raise ConfigError(f"expected a non-negative integer, got {p!r}", "form_degree")
    if p > dim:
        raise ConfigError(f"degree {p} exceeds grid dimension {dim}", "form_degree")
    kind = _string("form.kind", form.pop("kind", "fourier_mode"))
    if kind not in FORM_KEYS:
        raise ConfigError(f"unknown form kind {kind!r}; known: {', '.join(sorted(FORM_KEYS))}", "form.kind")
    for key in form:
        if key not in FORM_KEYS[kind]:
            raise ConfigError(f"unknown key for form kind {kind}", f"form.{key}")

    def section(sec):
        d = raw.get(sec, {})
        for key in d:
            if key not in SECTIONS[sec]:
                raise ConfigError("unknown key", f"{sec}.{key}")
        return d

    run, out, tol = section("run"), section("output"), section("tolerances")
    defaults = ExperimentConfig.__dataclass_fields__
    kw: dict[str, Any] = {}
    if "t_end" in run:
        kw["t_end"] = _number("run.t_end", run["t_end"], nonneg=True)
    if "cfl" in run:
        kw["cfl"] = _number("run.cfl", run["cfl"], positive=True)
        if kw["cfl"] > 1:
            raise ConfigError("must be <= 1", "run.cfl")
    if "max_steps" in run:
        kw["max_steps"] = _integer("run.max_steps", run["max_steps"], 0)
    if "record_every" in run:
        kw["record_every"] = _integer("run.record_every", run["record_every"], 1)
    if "spd_floor" in run:
        kw["spd_floor"] = _number("run.spd_floor", run["spd_floor"], nonneg=True)
    if "seed" in run:
        kw["seed"] = _integer("run.seed", run["seed"], 0)
    for key, attr in (("dir", "out_dir"), ("csv", "csv_name"), ("summary", "summary_name")):
        if key in out:
            kw[attr] = _string(f"output.{key}", out[key])
    for key in ("monotone_abs", "monotone_rel"):
        if key in tol:
            kw[key] = _number(f"tolerances.{key}", tol[key], nonneg=True)
    assert set(kw) <= set(defaults)

    return ExperimentConfig(
        dim=dim,
        points=points,
        periods=periods,
        scenario=name,
        scenario_params=dict(sorted(scen.items())),
        form_degree=p,
        form_kind=kind,
        form_params=dict(sorted(form.items())),
        source=source,
        **kw,
    )


def load_config(source: str | Path) -> ExperimentConfig:
    """Load from a path, or from TOML text if ``source`` is a string containing a newline or ``=``."""
    if isinstance(source, Path) or ("\n" not in source and "=" not in source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigReadError(f"cannot read {path}: {exc}") from exc
        return validate(parse_toml(text), str(path))
    return validate(parse_toml(source))
