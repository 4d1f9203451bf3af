"""
Hyperparameter sweeps over the unlearning learning rate or the number of optimization steps.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from ..config import ExperimentConfig, SweepSpec, UnlearnRun
from ..cost import method_kind
from ..lm import ModelParams
from ..schemas import MetricsReport
from ..state import SeedContext
from .artifacts import TRACE_COLUMNS, summary_rows, write_csv
from .pipeline import evaluate_model, prepare_seed, reference_target, train_vanilla, unlearn_method

logger = logging.getLogger("Harness.Sweep")

SWEEP_KEY = ["method", "axis", "point", "seed"]


def sweep_runs(cfg: ExperimentConfig, spec: SweepSpec) -> List[UnlearnRun]:
    """Configured runs restricted to the sweep's methods, in configuration order."""
    runs = cfg.methods
    if spec.methods is not None:
        by_name = {run.method.name: run for run in runs}
        runs = [by_name.get(name) or UnlearnRun(method=name) for name in spec.methods]
    return runs


def point_run(run: UnlearnRun, spec: SweepSpec, point: float) -> UnlearnRun:
    """The run at one grid point: fixed steps, with the swept axis set to `point`."""
    if spec.axis == "learning-rate":
        update = {"learning_rate": float(point), "steps": int(spec.fixed)}
    else:
        update = {"learning_rate": float(spec.fixed), "steps": int(point)}
    return run.model_copy(update={**update, "stop_rule": "fixed-steps"})


def sweep(
    cfg: ExperimentConfig, spec: Optional[SweepSpec] = None, write: bool = True
) -> Tuple[pd.DataFrame, List[MetricsReport]]:
    """One unlearning run per (grid point, method, seed); rows are keyed (method, axis, point, seed).

    Writes sweep.csv and sweep_traces.csv under the output directory when `write` is set.
    """
    spec = spec or cfg.sweep or SweepSpec()
    runs = sweep_runs(cfg, spec)
    rows: List[Dict] = []
    traces: List[Dict] = []
    reports: List[MetricsReport] = []

    for seed in cfg.seeds:
        context: SeedContext = prepare_seed(cfg, seed, write=write)
        vanilla: ModelParams = train_vanilla(context)
        target = reference_target(context, vanilla)
        for run in runs:
            for point in spec.grid:
                point_cfg = point_run(run, spec, point)
                name = run.method.name
                logger.info(f"[SWEEP] seed {seed} {name} {spec.axis}={point:g}")
                unlearned, summary = unlearn_method(context, vanilla, point_cfg, target)
                report = evaluate_model(
                    context,
                    unlearned,
                    target=target,
                    method=name,
                    summary=summary,
                    learning_rate=point_cfg.learning_rate,
                    steps=point_cfg.steps,
                    flops_kind=method_kind(point_cfg.method),
                )
                reports.append(report)
                row = summary_rows([report])[0]
                row.update({"method": name, "axis": spec.axis, "point": float(point)})
                row["instability"] = summary.diverged or summary.instability_events > 0
                rows.append(row)
                for step in summary.trace:
                    traces.append(
                        {"method": name, "axis": spec.axis, "point": float(point), "seed": seed, **step.model_dump()}
                    )

    table = pd.DataFrame(rows)
    if not table.empty:
        ordered = SWEEP_KEY + [c for c in table.columns if c not in SWEEP_KEY and c != "model"]
        table = table[ordered].sort_values(SWEEP_KEY, kind="mergesort").reset_index(drop=True)
    if write:
        out = Path(cfg.output_dir)
        write_csv(out / "sweep.csv", table.to_dict("records"), list(table.columns))
        trace_cols = ["method", "axis", "point"] + TRACE_COLUMNS
        write_csv(out / "sweep_traces.csv", traces, [c for c in trace_cols if c != "model"])
    logger.info(f"[SWEEP] {len(rows)} run(s) over {len(spec.grid)} point(s), {len(runs)} method(s), {len(cfg.seeds)} seed(s)")
    return table, reports


def median_trend(table: pd.DataFrame, method: str, column: str) -> pd.Series:
    """Median of `column` over seeds at each grid point for one method."""
    return table[table["method"] == method].groupby("point")[column].median().sort_index()


def inversions(values: pd.Series) -> int:
    """Number of decreases along a series."""
    diffs = values.diff().dropna()
    return int((diffs < 0).sum())
