"""
Unlearning runs, the retrain oracle and type-II behavioral unlearning.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import BehavioralConstraint, MethodSpec, ModelSpec, TrainConfig, UnlearnRun
from ..corpus import CorpusSplits
from ..errors import MethodSpecError, TrainingDivergedError
from ..eval import forbidden_probabilities, perplexity, type2_violation
from ..lm import ModelParams, Role, cross_entropy_gradients, init_model, train
from ..lm.model import check_tokens
from ..lm.optim import Grads, Optimizer, clip_by_global_norm, make_optimizer
from ..schemas import TraceStep, UnlearnSummary
from .objective import kl_items, unified_update

logger = logging.getLogger(__name__)

Sequences = List[List[int]]

BAND_BISECTIONS = 40
MIN_LR_FRACTION = 1e-4


def plan_batches(n_items: int, steps: int, rng: Optional[np.random.Generator] = None) -> List[List[int]]:
    """Split item indices into `steps` near-equal batches covering every item once.

    With more steps than items each batch holds a single item and the order wraps around.
    """
    if n_items <= 0 or steps <= 0:
        return []
    order = np.arange(n_items) if rng is None else rng.permutation(n_items)
    if steps <= n_items:
        return [chunk.tolist() for chunk in np.array_split(order, steps)]
    return [[int(order[i % n_items])] for i in range(steps)]


def retain_data(splits: CorpusSplits, spec: MethodSpec) -> Sequences:
    """R for in-distribution retain terms, G for general ones."""
    return splits.retain_sample if spec.retain_data == "in-distribution" else splits.general


def _land_in_band(
    model: ModelParams,
    grads: Grads,
    lr: float,
    optimizer: Optimizer,
    state: Dict[str, Any],
    forget: Sequences,
    band: Tuple[float, float],
    step: int,
) -> Tuple[Optional[ModelParams], float, float]:
    """Bisect the step size so the forget perplexity lands in [lower, upper].

    `state` is the optimizer state from before the overshooting update. The step is
    continuous in lr, so with ppl(0) below the band and ppl(lr) above it some lr in
    between lands inside. Returns (model, forget ppl, lr) of the accepted step, or of
    the largest step found below the band when the bisection runs out.
    """
    lower, upper = band
    lo, hi = 0.0, lr
    best: Tuple[Optional[ModelParams], float, float] = (None, float("nan"), 0.0)
    for _ in range(BAND_BISECTIONS):
        mid = 0.5 * (lo + hi)
        optimizer.restore(state)
        try:
            candidate = optimizer.update(model, grads, mid)
            candidate.check_finite(step, "band bisection")
            ppl = perplexity(candidate, forget)
        except TrainingDivergedError:
            ppl = float("inf")
        if ppl > upper:
            hi = mid
        elif ppl < lower:
            lo = mid
            best = (candidate, ppl, mid)
        else:
            return candidate, ppl, mid
    if best[0] is not None:
        optimizer.restore(state)
        return optimizer.update(model, grads, best[2]), best[1], best[2]
    optimizer.restore(state)
    return None, float("nan"), 0.0


def run_unlearning(
    vanilla: ModelParams,
    splits: CorpusSplits,
    run: UnlearnRun,
    target: Optional[float] = None,
    seed: int = 0,
) -> Tuple[ModelParams, UnlearnSummary]:
    """Unlearn U from the vanilla model under the run's stop rule.

    Each pass over U uses `run.steps` batches. The fixed-steps rule performs exactly
    `run.steps` updates; the target rule keeps passing over U until the forget-set
    perplexity reaches target * (1 - tolerance) or `run.step_budget` updates were made.
    An update that would carry the forget perplexity past target * (1 + tolerance) is
    re-applied with a bisected step size instead. Divergence stops the run and returns
    the last finite model with the flag set.
    """
    spec = run.method
    forget = splits.forget
    retain = retain_data(splits, spec) if spec.is_hybrid else []
    monitor = splits.retain_sample or splits.retain
    rng = np.random.default_rng(seed)

    band = None
    if run.stop_rule == "reach-forget-ppl-target":
        target = run.target if run.target is not None else target
        if target is None:
            raise MethodSpecError(f"{spec.name}: the target stop rule needs a forget-ppl target")
        budget = run.step_budget
        band = (target * (1.0 - run.tolerance), target * (1.0 + run.tolerance))
    else:
        budget = run.steps
    if spec.is_hybrid and not retain:
        raise MethodSpecError(f"{spec.name}: retain data ({spec.retain_data}) is empty")

    summary = UnlearnSummary(target=target if band is not None else None)
    optimizer = make_optimizer(run.optimizer)
    model = vanilla
    forget_ppl = perplexity(model, forget)
    logger.info(f"[UNLEARN] {spec.name}: start forget ppl {forget_ppl:.4f}, budget {budget}, lr {run.learning_rate:g}")

    forget_plan = plan_batches(len(forget), max(run.steps, 1), rng)
    retain_plan = plan_batches(len(retain), len(forget_plan), rng) if retain else []

    step = 0
    stop_reason = "budget"
    while True:
        if band is not None and forget_ppl >= band[0]:
            stop_reason = "target-reached"
            break
        if step >= budget:
            break
        idx = step % len(forget_plan)
        forget_batch = [forget[i] for i in forget_plan[idx]]
        retain_batch = [retain[i] for i in retain_plan[idx]] if retain_plan else None
        state = optimizer.state()
        try:
            outcome = unified_update(
                model, forget_batch, retain_batch, spec, run.learning_rate,
                optimizer=optimizer, vanilla=vanilla, max_grad_norm=run.max_grad_norm, step=step + 1,
            )
        except TrainingDivergedError as e:
            logger.warning(f"[UNLEARN] {spec.name}: {e}; keeping the last finite model")
            summary.diverged = True
            summary.instability_events += 1
            stop_reason = "diverged"
            break
        updated = outcome.model
        new_ppl = perplexity(updated, forget)
        if band is not None and new_ppl > band[1]:
            landed, landed_ppl, used_lr = _land_in_band(
                model, outcome.grads, run.learning_rate, optimizer, state, forget, band, step + 1
            )
            if landed is None:
                logger.warning(f"[UNLEARN] {spec.name}: no step size keeps the forget ppl inside the target band")
                stop_reason = "overshoot"
                break
            summary.backtracks += 1
            logger.debug(f"[UNLEARN] {spec.name} step {step + 1}: lr cut to {used_lr:.3e} to stay in the band")
            updated, new_ppl = landed, landed_ppl
        step += 1
        model = updated
        forget_ppl = new_ppl
        summary.forget_tokens += sum(len(s) - 1 for s in forget_batch)
        retain_ppl = perplexity(model, monitor)
        if outcome.clipped:
            summary.clip_events += 1
            summary.instability_events += 1
        summary.trace.append(
            TraceStep(
                step=step,
                forget_ppl=forget_ppl,
                retain_ppl=retain_ppl,
                grad_norm=outcome.grad_norm,
                clipped=outcome.clipped,
                objective=outcome.objective.total,
            )
        )
        logger.debug(
            f"[UNLEARN] {spec.name} step {step}: forget ppl {forget_ppl:.4f} retain ppl {retain_ppl:.4f} "
            f"grad-norm {outcome.grad_norm:.3e}{' (clipped)' if outcome.clipped else ''}"
        )

    summary.steps_taken = step
    summary.stop_reason = stop_reason
    if band is not None:
        summary.target_reached = forget_ppl >= band[0]
        if not summary.target_reached:
            logger.warning(
                f"[UNLEARN] {spec.name}: target ppl {target:.4f} not reached in {step} steps (at {forget_ppl:.4f})"
            )
    logger.info(f"[UNLEARN] {spec.name}: stopped after {step} steps ({stop_reason}), forget ppl {forget_ppl:.4f}")
    return model.with_role(Role.UNLEARNED), summary


def retrain_oracle(splits: CorpusSplits, cfg: TrainConfig, model_spec: ModelSpec, vocab_size: int) -> ModelParams:
    """Fresh model trained on D∖U only."""
    logger.info(f"[RETRAIN] training from scratch on {len(splits.retain_indices)} retained sequences")
    fresh = init_model(model_spec, vocab_size, cfg.seed)
    return train(fresh, splits.retain, cfg, role=Role.RETRAINED)


def forbidden_items(model: ModelParams, constraint: BehavioralConstraint, active: Optional[Sequence[bool]] = None):
    """One (block, target) item per forbidden pair, masking every position but the last.

    Pairs with a false `active` flag get an all-zero target and drop out of the mean.
    """
    items = []
    for i, (prefix, token) in enumerate(constraint.forbidden):
        block = check_tokens(model, [list(prefix) + [int(token)]])
        targets = np.zeros((1, len(prefix), model.vocab_size))
        if active is None or active[i]:
            targets[0, -1, int(token)] = 1.0
        items.append((block, targets))
    return items


def run_behavioral_unlearning(
    model: ModelParams,
    constraint: BehavioralConstraint,
    lr: float,
    step_budget: int,
    monitor: Sequence[Sequence[int]],
    retain: Optional[Sequence[Sequence[int]]] = None,
    retain_coefficient: float = 1.0,
    ppl_slack: Optional[float] = None,
    optimizer: str = "adam",
    max_grad_norm: Optional[float] = 1.0,
) -> Tuple[ModelParams, UnlearnSummary]:
    """Push the forbidden (prefix, token) probabilities below xi while staying close to the start model.

    Each update ascends the NLL of the pairs still above xi and, when `retain` is given,
    descends retain_coefficient * KL(P_start || P_model) on it. With `ppl_slack` set, an
    update that lifts the perplexity on `retain` (or `monitor` without it) above
    start * (1 + ppl_slack) is rolled back and retried at half the step size.
    """
    if constraint.mode != "type-II":
        raise MethodSpecError("behavioral unlearning targets a type-II constraint")
    summary = UnlearnSummary(target=constraint.xi)
    opt = make_optimizer(optimizer)
    start = model
    anchor = kl_items(start, retain) if retain and retain_coefficient > 0 else []
    guard_data = retain or monitor
    ceiling = perplexity(start, guard_data) * (1.0 + ppl_slack) if ppl_slack is not None else None
    step_lr = lr
    violation = type2_violation(model, constraint)
    step = 0
    while not violation.satisfied and step < step_budget:
        active = forbidden_probabilities(model, constraint.forbidden) > constraint.xi
        items = forbidden_items(model, constraint, active)
        value, grads = cross_entropy_gradients(model, items, ascent=True)
        if anchor:
            _, anchor_grads = cross_entropy_gradients(model, anchor, coefficient=retain_coefficient)
            grads = {name: g + anchor_grads[name] for name, g in grads.items()}
        grads, norm, clipped = clip_by_global_norm(grads, max_grad_norm)
        step += 1
        state = opt.state()
        try:
            if not np.isfinite(norm):
                raise TrainingDivergedError(step, "behavioral gradient", norm)
            candidate = opt.update(model, grads, step_lr)
            candidate.check_finite(step, "behavioral update")
        except TrainingDivergedError as e:
            logger.warning(f"[UNLEARN] type-II run: {e}")
            summary.diverged = True
            summary.instability_events += 1
            break
        if ceiling is not None and perplexity(candidate, guard_data) > ceiling:
            opt.restore(state)
            summary.rejected_steps += 1
            step_lr *= 0.5
            logger.debug(f"[UNLEARN] type-II step {step}: retain ppl above {ceiling:.4f}, lr cut to {step_lr:.3e}")
            if step_lr < lr * MIN_LR_FRACTION:
                summary.stop_reason = "retain-guard"
                break
            continue
        model = candidate
        violation = type2_violation(model, constraint)
        summary.forget_tokens += int(active.sum())
        summary.clip_events += int(clipped)
        summary.trace.append(
            TraceStep(
                step=step,
                forget_ppl=float(np.exp(-value)) if np.isfinite(value) else float("inf"),
                retain_ppl=perplexity(model, monitor),
                grad_norm=norm,
                clipped=clipped,
                objective=violation.value,
            )
        )
        logger.debug(f"[UNLEARN] type-II step {step}: violation {violation.value:.4e} (xi {constraint.xi:g})")
    summary.steps_taken = len(summary.trace)
    summary.target_reached = violation.satisfied
    if violation.satisfied:
        summary.stop_reason = "target-reached"
    elif summary.diverged:
        summary.stop_reason = "diverged"
    elif not summary.stop_reason:
        summary.stop_reason = "budget"
    logger.info(
        f"[UNLEARN] type-II run: {summary.steps_taken} steps, {summary.rejected_steps} rejected, "
        f"violation {violation.value:.4e}"
    )
    return model.with_role(Role.UNLEARNED), summary
