"""
Report, manifest and table writers for a run directory.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from ..hashing import sha256_hex
from ..schemas import MetricsReport, RunManifest

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["seed", "model", "step", "forget_ppl", "retain_ppl", "grad_norm", "clipped", "objective"]


def report_hash(report: MetricsReport) -> str:
    """Hash of the canonical report JSON; reports hold no timestamps."""
    return sha256_hex(report.model_dump(mode="python"))


def file_hash(path: Path) -> str:
    return sha256_hex(Path(path).read_bytes())


def write_json_model(path: Path, model) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_reports(run_dir: Path, named: Dict[str, MetricsReport]) -> Dict[str, str]:
    """reports/<name>.json per model plus metrics.json with all of them; returns the report hashes."""
    run_dir = Path(run_dir)
    hashes: Dict[str, str] = {}
    for name, report in named.items():
        write_json_model(run_dir / "reports" / f"{name}.json", report)
        hashes[name] = report_hash(report)
    combined = "{\n" + ",\n".join(
        f'"{name}": {report.model_dump_json()}' for name, report in named.items()
    ) + "\n}\n"
    (run_dir / "metrics.json").write_text(combined, encoding="utf-8")
    return hashes


def trace_rows(seed: int, named: Dict[str, MetricsReport]) -> List[dict]:
    rows = []
    for name, report in named.items():
        if report.unlearning is None:
            continue
        for step in report.unlearning.trace:
            rows.append({"seed": seed, "model": name, **step.model_dump()})
    return rows


def summary_rows(reports: Iterable[MetricsReport]) -> List[dict]:
    """One flat row per report: split metrics, MIA, behavioral measures and cost."""
    rows = []
    for report in reports:
        prov = report.provenance
        row = {
            "seed": prov.seed,
            "model": prov.method or prov.model_role,
            "role": prov.model_role,
            "learning_rate": prov.learning_rate,
            "steps": prov.steps,
        }
        for split, metrics in report.splits.items():
            row[f"{split}_ppl"] = metrics.perplexity
            row[f"{split}_acc"] = metrics.accuracy
        if report.mia is not None:
            row["mia_best_k"] = report.mia.best_k
            row["mia_auc"] = report.mia.best_auc
        if report.behavioral is not None:
            row["type1"] = report.behavioral.type1
            row["type2"] = report.behavioral.type2
        if report.unlearning is not None:
            row["steps_taken"] = report.unlearning.steps_taken
            row["target_reached"] = report.unlearning.target_reached
            row["backtracks"] = report.unlearning.backtracks
            row["rejected_steps"] = report.unlearning.rejected_steps
            row["instability_events"] = report.unlearning.instability_events
            row["diverged"] = report.unlearning.diverged
        row["flops"] = report.flops_text
        rows.append(row)
    return rows


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns) or None)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.debug(f"[ARTIFACTS] wrote {len(frame)} rows to {path}")
    return path


def write_manifest(run_dir: Path, manifest: RunManifest) -> Path:
    return write_json_model(Path(run_dir) / "manifest.json", manifest)
