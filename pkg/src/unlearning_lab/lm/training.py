"""
NLL training loop.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..config import TrainConfig
from ..errors import ModelInputError, TrainingDivergedError
from .data import make_batches
from .model import mean_nll, nll_gradients
from .optim import Optimizer, clip_by_global_norm, make_optimizer
from .params import ModelParams, Role

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: ModelParams
    epoch_nll: List[float] = field(default_factory=list)
    initial_nll: float = float("nan")
    best_epoch: int = 0
    clip_events: int = 0


def training_step(
    model: ModelParams,
    batch: Sequence[Sequence[int]],
    lr: float,
    optimizer: Optimizer,
    max_grad_norm: Optional[float] = None,
    step: int = 0,
):
    """One optimizer update on the mean per-token NLL of a batch.

    Returns (new model, loss, pre-clip grad norm, clipped).
    """
    loss, grads = nll_gradients(model, batch)
    if not np.isfinite(loss):
        raise TrainingDivergedError(step, "train loss", loss)
    grads, norm, clipped = clip_by_global_norm(grads, max_grad_norm)
    if not np.isfinite(norm):
        raise TrainingDivergedError(step, "train gradient", norm)
    updated = optimizer.update(model, grads, lr)
    updated.check_finite(step, "train update")
    return updated, loss, norm, clipped


def fit(model: ModelParams, data: Sequence[Sequence[int]], cfg: TrainConfig, role: Optional[Role] = None) -> TrainResult:
    """Train for cfg.epochs and keep the epoch-end snapshot with the lowest full-data NLL.

    The initial model competes too, so the result never scores worse than the start.
    """
    if not data:
        raise ModelInputError("training data must not be empty")
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(cfg.optimizer, cfg.beta1, cfg.beta2, cfg.eps)

    best = model
    best_nll = mean_nll(model, data)
    result = TrainResult(model=model, initial_nll=best_nll)
    logger.info(f"[TRAIN] {model.arch.value} P={model.param_count} initial NLL {best_nll:.4f} on {len(data)} sequences")

    step = 0
    current = model
    for epoch in range(1, cfg.epochs + 1):
        for batch in make_batches(data, cfg.batch_size, rng):
            step += 1
            current, loss, norm, clipped = training_step(
                current, batch, cfg.learning_rate, optimizer, cfg.max_grad_norm, step
            )
            result.clip_events += int(clipped)
            logger.debug(f"[TRAIN] step {step} loss {loss:.4f} grad-norm {norm:.3e}")
        epoch_nll = mean_nll(current, data)
        if not np.isfinite(epoch_nll):
            raise TrainingDivergedError(step, f"train epoch {epoch} NLL", epoch_nll)
        result.epoch_nll.append(epoch_nll)
        if epoch_nll <= best_nll:
            best, best_nll, result.best_epoch = current, epoch_nll, epoch
        logger.info(f"[TRAIN] epoch {epoch}/{cfg.epochs} NLL {epoch_nll:.4f} (ppl {np.exp(epoch_nll):.3f})")

    result.model = best.with_role(role) if role else best
    return result


def train(model: ModelParams, data: Sequence[Sequence[int]], cfg: TrainConfig, role: Optional[Role] = None) -> ModelParams:
    return fit(model, data, cfg, role).model
