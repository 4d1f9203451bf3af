"""
Unified first-order unlearning objective.

    J(M) = c_f * s * mean_forget CE(Q, P_M) + c_r * retain_term

with s = -1 for ascent (so descending J raises the forget NLL) and s = +1 otherwise.
The retain term is the mean NLL on retain data, or the mean KL(P_vanilla || P_M), whose
gradient equals that of CE(P_vanilla, P_M).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import MethodSpec
from ..errors import MethodSpecError, TrainingDivergedError
from ..eval import kl_divergence
from ..lm import ModelParams, cross_entropy_gradients
from ..lm.model import batch_position_distributions, check_tokens, group_by_length, one_hot_targets
from ..lm.optim import Grads, Optimizer, Sgd, clip_by_global_norm
from .reference import reference_targets

logger = logging.getLogger(__name__)

Batch = Sequence[Sequence[int]]
Items = List[Tuple[np.ndarray, np.ndarray]]


@dataclass
class ObjectiveValue:
    total: float
    forget: float
    retain: float
    grads: Grads = field(default_factory=dict)


@dataclass
class StepOutcome:
    model: ModelParams
    objective: ObjectiveValue
    grad_norm: float
    clipped: bool
    grads: Grads = field(default_factory=dict)


def _blocks(model: ModelParams, batch: Batch) -> List[np.ndarray]:
    return [check_tokens(model, [batch[i] for i in idx]) for length, idx in group_by_length(batch).items() if length >= 2]


def forget_items(spec: MethodSpec, model: ModelParams, batch: Batch) -> Items:
    return [(block, reference_targets(spec, model, block)) for block in _blocks(model, batch)]


def retain_items(spec: MethodSpec, model: ModelParams, batch: Batch, vanilla: Optional[ModelParams]) -> Items:
    if spec.retain_term == "descent-on-R":
        return [(block, one_hot_targets(block, model.vocab_size)) for block in _blocks(model, batch)]
    if vanilla is None:
        raise MethodSpecError(f"{spec.name}: the KL retain term needs the vanilla snapshot")
    return kl_items(vanilla, batch)


def kl_items(vanilla: ModelParams, batch: Batch) -> Items:
    """(block, vanilla next-token distributions) pairs; CE against them has the KL gradient."""
    return [
        (block, np.stack(batch_position_distributions(vanilla, list(block)))) for block in _blocks(vanilla, batch)
    ]


def kl_retain_term(model: ModelParams, vanilla: ModelParams, retain_batch: Batch) -> float:
    """Mean over retain positions of KL(P_vanilla(. | prefix) || P_model(. | prefix))."""
    p_vanilla = batch_position_distributions(vanilla, retain_batch)
    p_model = batch_position_distributions(model, retain_batch)
    values = [kl_divergence(pv, pm) for pv, pm in zip(p_vanilla, p_model) if len(pv)]
    if not values:
        return 0.0
    return float(np.concatenate([np.atleast_1d(v) for v in values]).mean())


def _entropy_offset(items: Items) -> float:
    """Mean entropy of the vanilla target rows: KL = CE - H."""
    rows = np.concatenate([t.reshape(-1, t.shape[-1]) for _, t in items], axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.where(rows > 0, rows * np.log(rows), 0.0).sum(axis=-1)
    return float(ent.mean())


def _check_batches(spec: MethodSpec, forget_batch: Batch, retain_batch: Optional[Batch]) -> None:
    if not forget_batch:
        raise MethodSpecError(f"{spec.name}: the forget batch must not be empty")
    has_retain = bool(retain_batch)
    if spec.is_hybrid and not has_retain:
        raise MethodSpecError(f"{spec.name}: retain term '{spec.retain_term}' needs a non-empty retain batch")
    if not spec.is_hybrid and has_retain:
        raise MethodSpecError(f"{spec.name}: a retain batch was given but the method has no retain term")


def unlearning_gradients(
    model: ModelParams,
    forget_batch: Batch,
    retain_batch: Optional[Batch],
    spec: MethodSpec,
    vanilla: Optional[ModelParams] = None,
) -> ObjectiveValue:
    """Value of each term and the gradient of the combined objective."""
    _check_batches(spec, forget_batch, retain_batch)
    forget_value, grads = cross_entropy_gradients(
        model,
        forget_items(spec, model, forget_batch),
        coefficient=spec.forget_coefficient,
        ascent=spec.forget_sign == "ascent",
    )
    retain_value = 0.0
    if spec.is_hybrid:
        items = retain_items(spec, model, retain_batch, vanilla)
        retain_value, retain_grads = cross_entropy_gradients(model, items, coefficient=spec.retain_coefficient)
        if spec.retain_term == "kl-to-vanilla-on-R":
            retain_value -= spec.retain_coefficient * _entropy_offset(items)
        for name in grads:
            grads[name] = grads[name] + retain_grads[name]
    return ObjectiveValue(total=forget_value + retain_value, forget=forget_value, retain=retain_value, grads=grads)


def unified_update(
    model: ModelParams,
    forget_batch: Batch,
    retain_batch: Optional[Batch],
    spec: MethodSpec,
    lr: float,
    optimizer: Optional[Optimizer] = None,
    vanilla: Optional[ModelParams] = None,
    max_grad_norm: Optional[float] = None,
    step: int = 0,
) -> StepOutcome:
    """One optimizer step on the unified objective, with diagnostics."""
    objective = unlearning_gradients(model, forget_batch, retain_batch, spec, vanilla)
    if not np.isfinite(objective.total):
        raise TrainingDivergedError(step, f"unlearn objective ({spec.name})", objective.total)
    grads, norm, clipped = clip_by_global_norm(objective.grads, max_grad_norm)
    if not np.isfinite(norm):
        raise TrainingDivergedError(step, f"unlearn gradient ({spec.name})", norm)
    optimizer = optimizer or Sgd()
    updated = optimizer.update(model, grads, lr)
    updated.check_finite(step, f"unlearn update ({spec.name})")
    return StepOutcome(model=updated, objective=objective, grad_norm=norm, clipped=clipped, grads=grads)


def unified_step(
    model: ModelParams,
    forget_batch: Batch,
    retain_batch: Optional[Batch],
    spec: MethodSpec,
    lr: float,
    optimizer: Optional[Optimizer] = None,
    vanilla: Optional[ModelParams] = None,
    max_grad_norm: Optional[float] = None,
) -> ModelParams:
    return unified_update(model, forget_batch, retain_batch, spec, lr, optimizer, vanilla, max_grad_norm).model
