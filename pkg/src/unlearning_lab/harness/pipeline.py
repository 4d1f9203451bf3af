"""
Pipeline stages of one seed: corpus, vanilla training, retrain oracle and evaluation.
The LangGraph nodes in `experiment` and the CLI subcommands both call these.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..config import BehavioralConstraint, ExperimentConfig, UnlearnRun
from ..corpus import generate, generator_alphabet, make_splits, validate_spec, write_corpus, write_split_manifest
from ..cost import format_flops, method_flops, training_flops
from ..eval import (
    RetrainTarget,
    approx_retrain_target,
    mia_auc_sweep,
    split_score,
    type1_measure,
    type2_violation,
)
from ..hashing import derive_seed
from ..lm import CharVocab, ModelParams, Role, init_model, train
from ..schemas import (
    BehavioralSummary,
    MetricsReport,
    MiaSummary,
    Provenance,
    RetrainTargetSummary,
    SplitMetrics,
    UnlearnSummary,
)
from ..state import SeedContext
from ..unlearn import retrain_oracle, run_behavioral_unlearning, run_unlearning

logger = logging.getLogger(__name__)

TYPE2_RUN_NAME = "type-ii-unlearning"


def seed_dir(cfg: ExperimentConfig, seed: int) -> Path:
    return Path(cfg.output_dir) / f"seed-{seed}"


def corpus_seed(cfg: ExperimentConfig, seed: int) -> int:
    return derive_seed(cfg.generator.seed, seed, "corpus")


def train_seed(cfg: ExperimentConfig, seed: int) -> int:
    """Vanilla and retrained models share initialization and shuffling."""
    return derive_seed(cfg.train.seed, seed, "vanilla")


def unlearn_seed(seed: int, method: str) -> int:
    return derive_seed(seed, "unlearn", method)


def draw_forbidden_pairs(
    forget: List[List[int]], count: int, xi: float, seed: int
) -> BehavioralConstraint:
    """Forbidden (prefix, next token) pairs sampled from the forget set."""
    rng = np.random.default_rng(derive_seed(seed, "forbidden"))
    candidates = [(i, t) for i, seq in enumerate(forget) for t in range(1, len(seq))]
    if not candidates:
        raise ValueError("forget set has no sequence long enough for a forbidden pair")
    picks = rng.choice(len(candidates), size=min(count, len(candidates)), replace=False)
    pairs = []
    for p in sorted(int(x) for x in picks):
        i, t = candidates[p]
        pairs.append((list(forget[i][:t]), int(forget[i][t])))
    return BehavioralConstraint(mode="type-II", forbidden=pairs, xi=xi)


def prepare_seed(cfg: ExperimentConfig, seed: int, write: bool = True) -> SeedContext:
    """Generate D, split it and encode everything with the generator's alphabet."""
    validate_spec(cfg.generator)
    c_seed = corpus_seed(cfg, seed)
    corpus = generate(cfg.generator, seed=c_seed)
    text_splits = make_splits(
        corpus,
        forget_fraction=cfg.splits.forget_fraction,
        retain_sample_size=cfg.splits.retain_sample_size,
        approx_size=cfg.splits.approx_size,
        seed=derive_seed(seed, "splits"),
        spec=cfg.generator,
        general_size=cfg.splits.general_size,
    )
    vocab = CharVocab(generator_alphabet(cfg.generator))
    splits = text_splits.map(vocab.encode)

    settings = cfg.behavioral
    prompts: List[List[int]] = []
    forbidden: Optional[BehavioralConstraint] = None
    if settings.enabled:
        general = splits.general or splits.retain
        prompts = [list(s) for s in splits.forget] + [list(s) for s in general[: settings.general_prompt_sample]]
        forbidden = draw_forbidden_pairs(splits.forget, settings.num_forbidden_pairs, settings.xi, seed)

    run_dir = seed_dir(cfg, seed)
    if write:
        write_corpus(run_dir / "corpus.txt", corpus)
        write_corpus(run_dir / "approximate.txt", text_splits.approximate)
        write_split_manifest(run_dir / "splits.json", text_splits, extra={"seed": seed, "corpus_seed": c_seed})

    return SeedContext(
        cfg=cfg,
        seed=seed,
        config_hash=cfg.config_hash(),
        run_dir=run_dir,
        vocab=vocab,
        text_splits=text_splits,
        splits=splits,
        prompts=prompts,
        forbidden=forbidden,
    )


def train_vanilla(ctx: SeedContext) -> ModelParams:
    cfg = ctx.cfg
    train_cfg = cfg.train.model_copy(update={"seed": train_seed(cfg, ctx.seed)})
    fresh = init_model(cfg.model, len(ctx.vocab), train_cfg.seed)
    logger.info(f"[TRAIN] seed {ctx.seed}: vanilla {cfg.model.arch} on {len(ctx.splits.train)} sequences")
    return train(fresh, ctx.splits.train, train_cfg, role=Role.VANILLA)


def train_retrained(ctx: SeedContext) -> ModelParams:
    cfg = ctx.cfg
    train_cfg = cfg.train.model_copy(update={"seed": train_seed(cfg, ctx.seed)})
    return retrain_oracle(ctx.splits, train_cfg, cfg.model, len(ctx.vocab))


def unlearn_method(
    ctx: SeedContext,
    vanilla: ModelParams,
    run: UnlearnRun,
    target: RetrainTarget,
) -> Tuple[ModelParams, UnlearnSummary]:
    return run_unlearning(vanilla, ctx.splits, run, target=target.ppl, seed=unlearn_seed(ctx.seed, run.method.name))


def behavioral_unlearn(ctx: SeedContext, vanilla: ModelParams) -> Tuple[ModelParams, UnlearnSummary]:
    """Type-II run: ascent on the violating forbidden pairs, anchored to the vanilla model on R or G."""
    settings = ctx.cfg.behavioral
    retain = ctx.splits.retain_sample if settings.retain_data == "in-distribution" else ctx.splits.general
    return run_behavioral_unlearning(
        vanilla,
        ctx.forbidden,
        settings.learning_rate,
        settings.step_budget,
        monitor=ctx.splits.retain_sample or ctx.splits.retain,
        retain=retain,
        retain_coefficient=settings.retain_coefficient,
        ppl_slack=settings.ppl_slack,
    )


def _split_metrics(model: ModelParams, data) -> SplitMetrics:
    score = split_score(model, data)
    # float rounding may put a near-perfect model a hair under 1
    return SplitMetrics(perplexity=max(score.perplexity, 1.0), accuracy=score.accuracy, tokens=score.tokens)


def evaluate_model(
    ctx: SeedContext,
    model: ModelParams,
    retrained: Optional[ModelParams] = None,
    target: Optional[RetrainTarget] = None,
    method: Optional[str] = None,
    summary: Optional[UnlearnSummary] = None,
    learning_rate: Optional[float] = None,
    steps: Optional[int] = None,
    flops_kind: Optional[str] = None,
) -> MetricsReport:
    """Every metric of one model, with provenance.

    `flops_kind` names the cost-model method (a preset or a method kind); models
    without one are charged their training cost.
    """
    splits = ctx.splits
    cfg = ctx.cfg
    scores = {
        "forget": _split_metrics(model, splits.forget),
        "retain": _split_metrics(model, splits.retain),
        "approximate": _split_metrics(model, splits.approximate),
    }
    if splits.general:
        scores["general"] = _split_metrics(model, splits.general)

    mia = mia_auc_sweep(model, splits.forget, splits.approximate, cfg.mia)
    mia_summary = MiaSummary(
        auc_per_k={f"{k:g}": v for k, v in mia.auc_per_k.items()}, best_k=mia.best_k, best_auc=mia.best_auc
    )

    behavioral = None
    if cfg.behavioral.enabled:
        behavioral = BehavioralSummary()
        if retrained is not None and ctx.prompts:
            behavioral.type1 = type1_measure(model, retrained, ctx.prompts, cfg.behavioral.alpha)
            behavioral.type1_alpha = cfg.behavioral.alpha
        if ctx.forbidden is not None:
            violation = type2_violation(model, ctx.forbidden)
            behavioral.type2 = violation.value
            behavioral.type2_xi = violation.xi
            behavioral.type2_satisfied = violation.satisfied

    if summary is not None and flops_kind is not None:
        flops = method_flops(flops_kind, summary.forget_tokens, model.param_count)
    else:
        data = splits.train if model.role == Role.VANILLA else splits.retain
        tokens = sum(len(s) - 1 for s in data) * cfg.train.epochs
        flops = training_flops(tokens, model.param_count)

    report = MetricsReport(
        provenance=Provenance(
            model_role=model.role.value,
            method=method,
            config_hash=ctx.config_hash,
            seed=ctx.seed,
            learning_rate=learning_rate,
            steps=steps,
            param_count=model.param_count,
            fingerprint=model.fingerprint(),
        ),
        splits=scores,
        mia=mia_summary,
        behavioral=behavioral,
        approx_target=RetrainTargetSummary(ppl=target.ppl, acc=target.acc) if target else None,
        unlearning=summary,
        flops=flops,
        flops_text=format_flops(flops),
    )
    logger.info(
        f"[EVAL] seed {ctx.seed} {method or model.role.value}: forget ppl {scores['forget'].perplexity:.4f} "
        f"retain ppl {scores['retain'].perplexity:.4f} MIA auc {mia.best_auc:.4f} (k={mia.best_k:g})"
    )
    return report


def report_name(report: MetricsReport) -> str:
    return report.provenance.method or report.provenance.model_role


def reference_target(ctx: SeedContext, vanilla: ModelParams) -> RetrainTarget:
    return approx_retrain_target(vanilla, ctx.splits.approximate)