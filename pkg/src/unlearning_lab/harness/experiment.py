"""
End-to-end experiment graph.
One seed flows prepare_corpus -> train_vanilla -> retrain_oracle -> evaluate_references, then fans out
one method_team per unlearning method (plus the type-II run) and joins in finalize.
"""

import logging
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from langchain_core.runnables import RunnableConfig
from langgraph.graph import END, START, StateGraph
from langgraph.types import Send

from ..config import ExperimentConfig
from ..cost import method_kind
from ..eval import MiaResult, mia_table_csv
from ..lm import save_checkpoint
from ..schemas import FailureRecord, MetricsReport, RunManifest
from ..state import ExperimentState, MethodOutputState, MethodState
from .artifacts import (
    TRACE_COLUMNS,
    file_hash,
    summary_rows,
    trace_rows,
    write_csv,
    write_manifest,
    write_reports,
)
from .pipeline import (
    TYPE2_RUN_NAME,
    behavioral_unlearn,
    evaluate_model,
    prepare_seed,
    reference_target,
    report_name,
    train_retrained,
    train_vanilla,
    unlearn_method,
)
from .search import search_learning_rate

logger = logging.getLogger("Harness.Experiment")

STAGE_ORDER = ["prepare_corpus", "train_vanilla", "retrain_oracle", "evaluate_references"]


def _failure(stage: str, error: Exception, seed: Optional[int] = None, method: Optional[str] = None) -> FailureRecord:
    logger.error(f"[EXPERIMENT] {stage} failed{f' for {method}' if method else ''}: {error}")
    logger.debug(traceback.format_exc())
    return FailureRecord(stage=stage, error=f"{type(error).__name__}: {error}", seed=seed, method=method)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


# Seed-level nodes
def prepare_corpus(state: ExperimentState, config: RunnableConfig):
    cfg = ExperimentConfig.from_runnable_config(config)
    seed = state["seed"]
    try:
        context = prepare_seed(cfg, seed)
    except Exception as e:
        return {"failures": [_failure("prepare_corpus", e, seed)]}
    return {"context": context, "stages": ["prepare_corpus"]}


def train_vanilla_node(state: ExperimentState):
    context = state.get("context")
    if context is None:
        return {}
    try:
        vanilla = train_vanilla(context)
        path = save_checkpoint(vanilla, context.run_dir / "checkpoints" / "vanilla.npz", context.vocab)
    except Exception as e:
        return {"failures": [_failure("train_vanilla", e, context.seed)]}
    return {
        "vanilla": vanilla,
        "vanilla_fingerprint": vanilla.fingerprint(),
        "vanilla_checkpoint_hash": file_hash(path),
        "stages": ["train_vanilla"],
    }


def retrain_oracle_node(state: ExperimentState):
    context = state.get("context")
    if context is None:
        return {}
    try:
        retrained = train_retrained(context)
    except Exception as e:
        return {"failures": [_failure("retrain_oracle", e, context.seed)]}
    return {"retrained": retrained, "models": [("retrained", retrained)], "stages": ["retrain_oracle"]}


def evaluate_references(state: ExperimentState):
    """Approximate-retraining target plus full reports for the vanilla and retrained models."""
    context = state.get("context")
    vanilla = state.get("vanilla")
    if context is None or vanilla is None:
        return {}
    retrained = state.get("retrained")
    update: Dict = {"stages": ["evaluate_references"], "reports": [], "failures": []}
    try:
        target = reference_target(context, vanilla)
        update["target"] = target
        update["reports"].append(evaluate_model(context, vanilla, retrained=retrained, target=target))
        if retrained is not None:
            update["reports"].append(evaluate_model(context, retrained, retrained=retrained, target=target))
    except Exception as e:
        update["failures"].append(_failure("evaluate_references", e, context.seed))
    return update


def method_router(state: ExperimentState):
    """Fan out one method_team per configured method; the type-II run goes alongside."""
    context = state.get("context")
    vanilla = state.get("vanilla")
    target = state.get("target")
    if context is None or vanilla is None or target is None:
        return "finalize"
    shared = {
        "context": context,
        "vanilla": vanilla,
        "retrained": state.get("retrained"),
        "target": target,
    }
    sends = [Send("method_team", {**shared, "run": run}) for run in context.cfg.methods]
    if context.forbidden is not None:
        sends.append(Send("behavioral_unlearning", shared))
    return sends or "finalize"


# Method sub-graph nodes
def unlearn_node(state: MethodState):
    context, run = state["context"], state["run"]
    name = run.method.name
    try:
        if context.cfg.lr_search.enabled:
            lr = search_learning_rate(context, state["vanilla"], run, state["target"], context.cfg.lr_search)
            run = run.model_copy(update={"learning_rate": lr})
        unlearned, summary = unlearn_method(context, state["vanilla"], run, state["target"])
    except Exception as e:
        return {"failures": [_failure("unlearn", e, context.seed, name)]}
    return {
        "run": run,
        "unlearned": unlearned,
        "summary": summary,
        "learning_rate": run.learning_rate,
        "models": [(name, unlearned)],
        "stages": [f"unlearn:{name}"],
    }


def evaluate_unlearned(state: MethodState):
    context, run = state["context"], state["run"]
    name = run.method.name
    if "unlearned" not in state:
        return {}
    try:
        report = evaluate_model(
            context,
            state["unlearned"],
            retrained=state.get("retrained"),
            target=state["target"],
            method=name,
            summary=state["summary"],
            learning_rate=state["learning_rate"],
            steps=run.steps,
            flops_kind=method_kind(run.method),
        )
    except Exception as e:
        return {"failures": [_failure("evaluate", e, context.seed, name)]}
    return {"reports": [report], "stages": [f"evaluate:{name}"]}


def behavioral_node(state: MethodState):
    context = state["context"]
    try:
        unlearned, summary = behavioral_unlearn(context, state["vanilla"])
        report = evaluate_model(
            context,
            unlearned,
            retrained=state.get("retrained"),
            target=state["target"],
            method=TYPE2_RUN_NAME,
            summary=summary,
            learning_rate=context.cfg.behavioral.learning_rate,
            flops_kind="first-order",
        )
    except Exception as e:
        return {"failures": [_failure("behavioral_unlearning", e, context.seed, TYPE2_RUN_NAME)]}
    return {
        "reports": [report],
        "models": [(TYPE2_RUN_NAME, unlearned)],
        "stages": [f"unlearn:{TYPE2_RUN_NAME}", f"evaluate:{TYPE2_RUN_NAME}"],
    }


def mia_results(named: Dict[str, MetricsReport]) -> Dict[str, MiaResult]:
    """Per-model AUC sweeps recovered from the reports."""
    return {
        name: MiaResult(
            best_k=r.mia.best_k,
            best_auc=r.mia.best_auc,
            auc_per_k={float(k): auc for k, auc in r.mia.auc_per_k.items()},
        )
        for name, r in named.items()
        if r.mia is not None
    }


def finalize(state: ExperimentState):
    """Write checkpoints, reports, tables and the manifest; check vanilla isolation."""
    seed = state["seed"]
    context = state.get("context")
    manifest: RunManifest = state["manifest"]
    failures: List[FailureRecord] = list(state.get("failures", []))
    if context is None:
        manifest.failures = failures
        manifest.invariants_ok = False
        manifest.finished_at = _now()
        return {"manifest": manifest}

    run_dir = context.run_dir
    reports = sorted(state.get("reports", []), key=report_name)
    named: Dict[str, MetricsReport] = {report_name(r): r for r in reports}
    try:
        for name, model in sorted(state.get("models", []), key=lambda item: item[0]):
            save_checkpoint(model, run_dir / "checkpoints" / f"{name}.npz", context.vocab)
        manifest.report_hashes = write_reports(run_dir, named)
        write_csv(run_dir / "summary.csv", summary_rows(reports))
        write_csv(run_dir / "traces.csv", trace_rows(seed, named), TRACE_COLUMNS)
        mia_table_csv(mia_results(named), run_dir / "mia.csv")
        (run_dir / "config.snapshot.yaml").write_text(context.cfg.to_yaml(), encoding="utf-8")
    except Exception as e:
        failures.append(_failure("finalize", e, seed))

    vanilla = state.get("vanilla")
    if vanilla is not None:
        manifest.vanilla_fingerprint_before = state.get("vanilla_fingerprint")
        manifest.vanilla_fingerprint_after = vanilla.fingerprint()
        checkpoint = run_dir / "checkpoints" / "vanilla.npz"
        if manifest.vanilla_fingerprint_after != manifest.vanilla_fingerprint_before:
            failures.append(FailureRecord(stage="isolation", error="vanilla parameters changed during unlearning", seed=seed))
        elif not checkpoint.exists() or file_hash(checkpoint) != state.get("vanilla_checkpoint_hash"):
            failures.append(FailureRecord(stage="isolation", error="vanilla checkpoint file changed", seed=seed))

    invalid = [r for r in reports if r.provenance.config_hash != context.config_hash or r.provenance.seed != seed]
    if invalid:
        failures.append(
            FailureRecord(stage="provenance", error=f"{len(invalid)} report(s) carry foreign provenance", seed=seed)
        )

    stages = list(state.get("stages", []))
    manifest.stages = [s for s in STAGE_ORDER if s in stages] + sorted(s for s in stages if s not in STAGE_ORDER)
    manifest.failures = sorted(failures, key=lambda f: (f.stage, f.method or ""))
    manifest.invariants_ok = not failures
    manifest.finished_at = _now()
    write_manifest(run_dir, manifest)
    logger.info(
        f"[EXPERIMENT] seed {seed}: {len(reports)} report(s), {len(failures)} failure(s) -> {run_dir}"
    )
    return {"manifest": manifest}


def build_method_graph():
    """Sub-graph run once per method: unlearn then evaluate."""
    method_builder = StateGraph(MethodState, output_schema=MethodOutputState)
    method_builder.add_node("run_unlearning", unlearn_node)
    method_builder.add_node("evaluate_unlearned", evaluate_unlearned)
    method_builder.add_edge(START, "run_unlearning")
    method_builder.add_edge("run_unlearning", "evaluate_unlearned")
    method_builder.add_edge("evaluate_unlearned", END)
    return method_builder.compile()


def build_experiment_graph():
    """Seed-level graph with the per-method fan-out."""
    builder = StateGraph(ExperimentState)
    builder.add_node("prepare_corpus", prepare_corpus)
    builder.add_node("train_vanilla", train_vanilla_node)
    builder.add_node("retrain_oracle", retrain_oracle_node)
    builder.add_node("evaluate_references", evaluate_references)
    builder.add_node("method_team", build_method_graph())
    builder.add_node("behavioral_unlearning", behavioral_node)
    builder.add_node("finalize", finalize)

    builder.add_edge(START, "prepare_corpus")
    builder.add_edge("prepare_corpus", "train_vanilla")
    builder.add_edge("train_vanilla", "retrain_oracle")
    builder.add_edge("retrain_oracle", "evaluate_references")
    builder.add_conditional_edges(
        "evaluate_references", method_router, ["method_team", "behavioral_unlearning", "finalize"]
    )
    builder.add_edge("method_team", "finalize")
    builder.add_edge("behavioral_unlearning", "finalize")
    builder.add_edge("finalize", END)
    return builder.compile()


graph = build_experiment_graph()


def run_seed(cfg: ExperimentConfig, seed: int) -> ExperimentState:
    """Run the whole graph for one seed and return its final state."""
    manifest = RunManifest(config_hash=cfg.config_hash(), seed=seed, started_at=_now())
    config: RunnableConfig = {"configurable": {"experiment": cfg}}
    logger.info(f"[EXPERIMENT] seed {seed} -> {cfg.output_dir}")
    return graph.invoke(
        {"seed": seed, "manifest": manifest, "stages": [], "reports": [], "models": [], "failures": []},
        config=config,
    )


def run_experiment(cfg: ExperimentConfig) -> Dict[int, ExperimentState]:
    """Every seed of the config; writes a cross-seed summary.csv under the output directory."""
    results: Dict[int, ExperimentState] = {}
    for seed in cfg.seeds:
        results[seed] = run_seed(cfg, seed)
    all_reports = [r for state in results.values() for r in sorted(state.get("reports", []), key=report_name)]
    write_csv(Path(cfg.output_dir) / "summary.csv", summary_rows(all_reports))
    ok = all(state["manifest"].invariants_ok for state in results.values())
    logger.info(f"[EXPERIMENT] {len(cfg.seeds)} seed(s) done, invariants {'ok' if ok else 'FAILED'}")
    return results
