"""Build initial data from a config, run the coupled flow, write CSV and JSON artifacts."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .flow import FlowState, StepControl, make_state, run_flow
from .forms import CODIFF_SIGN
from .monitor import CSV_COLUMNS, Monitor, MonotonicityVerdict, TimeSeriesRecord, CLAIMS, check_monotone, hypothesis_intervals
from .scenarios import ScenarioError, build_form, build_metric

log = logging.getLogger("ricciforms")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_IO = 4

CONVENTIONS = {
    "codifferential_sign": CODIFF_SIGN,
    "codifferential": "delta xi_{I} = +g^{jk} xi_{jI;k}",
    "form_laplacian": "d delta + delta d (negative semidefinite)",
    "riemann_low": "R_{ijkl} = g_{hl} R^h_{ijk}; R_{ijji} is sectional curvature",
    "curvature_operator_bound": "k = half the smallest eigenvalue of R_{ijkl} on 2-forms",
    "form_norm": "|xi|^2 summed over all index tuples",
    "weight": "exp(k p (p-1) t)",
}


class OutputError(OSError):
    pass


def initial_state(cfg: ExperimentConfig) -> FlowState:
    """Initial metric and form from the catalog; parameter problems become :class:`ConfigError`."""
    grid = cfg.grid
    try:
        g = build_metric(cfg.scenario, grid, dict(cfg.scenario_params), cfg.seed)
        xi = build_form(cfg.form_kind, grid, cfg.form_degree, dict(cfg.form_params), cfg.seed)
    except ScenarioError as exc:
        raise ConfigError(exc.message, exc.field) from exc
    # the SPD floor guards the stepping; the catalog metrics are SPD by construction
    return make_state(g, xi)


def check_semantics(cfg: ExperimentConfig) -> None:
    """Everything ``validate`` can check without running the flow."""
    initial_state(cfg)


@dataclass
class ExperimentOutcome:
    exit_code: int
    records: list[TimeSeriesRecord]
    summary: dict
    csv_path: Path
    summary_path: Path


def verdicts_for(records: list[TimeSeriesRecord], cfg: ExperimentConfig) -> dict[str, MonotonicityVerdict]:
    out = {}
    for claim, attr in CLAIMS.items():
        q0 = getattr(records[0], attr)
        tol = cfg.monotone_abs + cfg.monotone_rel * abs(q0) if math.isfinite(q0) else cfg.monotone_abs
        out[claim] = check_monotone(records, claim, tol)
    return out


def _extreme(values, fn):
    vals = [v for v in values if math.isfinite(v)]
    return fn(vals) if vals else math.nan


def build_summary(records, cfg, steps, t_final, singularity, drift) -> dict:
    verdicts = verdicts_for(records, cfg)
    sing = None
    if singularity is not None:
        sing = {
            "t": singularity.t,
            "node": list(singularity.node),
            "min_eig_g": singularity.min_eig,
            "message": str(singularity),
        }
    return {
        "version": __version__,
        "status": "completed" if singularity is None else "singularity",
        "exit_code": EXIT_OK if singularity is None else EXIT_SINGULARITY,
        "steps": steps,
        "rows": len(records),
        "t_final": t_final,
        "singularity": sing,
        "k_used": records[0].k_used,
        "verdicts": {k: v.as_dict() for k, v in verdicts.items()},
        "hypothesis_intervals": [list(iv) for iv in hypothesis_intervals(records)],
        "pinch_extremes": {
            "L_min": _extreme([r.L_val for r in records], min),
            "W_max": _extreme([r.W_val for r in records], max),
            "theorem1_margin_min": _extreme([r.theorem1_margin for r in records], min),
            "huisken_ratio_max": _extreme([r.huisken_ratio_max for r in records], max),
            "R_min": _extreme([r.scalar_curv_min for r in records], min),
            "R_max": _extreme([r.scalar_curv_max for r in records], max),
            "min_eig_g": _extreme([r.min_eig_g for r in records], min),
        },
        "eq7_residual_max": _extreme([r.eq7_residual_sup for r in records], max),
        "metric_drift_sup": drift,
        "conventions": CONVENTIONS,
        "config": cfg.as_dict(),
    }


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def format_csv(records: list[TimeSeriesRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(format(float(v), ".17g") for v in rec.row()))
    return "\n".join(lines) + "\n"


def format_summary(summary: dict) -> str:
    return json.dumps(_json_safe(summary), indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_outputs(records: list[TimeSeriesRecord], cfg: ExperimentConfig, summary: dict) -> tuple[Path, Path]:
    """Write the CSV series and the JSON summary; nothing is written for an empty trajectory."""
    if not records:
        raise ValueError("empty trajectory: nothing to write")
    out = Path(cfg.out_dir)
    csv_path, summary_path = out / cfg.csv_name, out / cfg.summary_name
    csv_text, summary_text = format_csv(records), format_summary(summary)
    try:
        _atomic_write(csv_path, csv_text)
        _atomic_write(summary_path, summary_text)
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out}: {exc}") from exc
    return csv_path, summary_path


class _Progress:
    def __init__(self, every: int):
        self.every = every

    def __call__(self, state: FlowState) -> None:
        if state.step_count % self.every == 0:
            log.info("step %d  t=%.6g  min eig g=%.6g", state.step_count, state.t, state.ms.min_eig_g)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentOutcome:
    """Run one experiment; ``exit_code`` is 0 on success and 3 when the metric degenerates."""
    state0 = initial_state(cfg)
    ctrl = StepControl(t_end=cfg.t_end, cfl=cfg.cfl, max_steps=cfg.max_steps, spd_floor=cfg.spd_floor)
    monitor = Monitor(record_every=cfg.record_every)
    g0 = state0.ms.g
    result = run_flow(state0, ctrl, [monitor, _Progress(max(cfg.record_every, 100))])
    records = monitor.finalize()
    drift = float(np.max(np.abs(result.final.ms.g - g0)))
    if result.singularity is not None:
        log.warning("%s", result.singularity)
    summary = build_summary(records, cfg, result.steps, result.final.t, result.singularity, drift)
    out = Path(cfg.out_dir)
    csv_path, summary_path = out / cfg.csv_name, out / cfg.summary_name
    if write:
        csv_path, summary_path = emit_outputs(records, cfg, summary)
    return ExperimentOutcome(summary["exit_code"], records, summary, csv_path, summary_path)
