"""
Perplexity, next-token accuracy and the approximate-retraining target.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ModelInputError
from ..lm import ModelParams, batch_position_distributions, total_nll

logger = logging.getLogger(__name__)

Sequences = Sequence[Sequence[int]]


@dataclass(frozen=True)
class SplitScore:
    perplexity: float
    accuracy: float
    tokens: int


@dataclass(frozen=True)
class RetrainTarget:
    """Vanilla-model metrics on the approximate set, standing in for the retrained model on U."""

    ppl: float
    acc: float


def perplexity(model: ModelParams, data: Sequences) -> float:
    """exp(total NLL / total predicted tokens)."""
    if len(data) == 0:
        raise ModelInputError("perplexity needs a non-empty dataset")
    nll, tokens = total_nll(model, data)
    if tokens == 0:
        raise ModelInputError("dataset has no predicted positions")
    return float(math.exp(nll / tokens))


def next_token_accuracy(model: ModelParams, data: Sequences) -> float:
    """Fraction of positions whose argmax prediction (lowest id on ties) is the true token."""
    if len(data) == 0:
        raise ModelInputError("accuracy needs a non-empty dataset")
    hits, total = 0, 0
    for seq, probs in zip(data, batch_position_distributions(model, data)):
        if len(seq) < 2:
            continue
        hits += int(np.sum(np.argmax(probs, axis=-1) == np.asarray(seq[1:])))
        total += len(seq) - 1
    return hits / total if total else 0.0


def split_score(model: ModelParams, data: Sequences) -> SplitScore:
    tokens = sum(max(len(s) - 1, 0) for s in data)
    return SplitScore(perplexity=perplexity(model, data), accuracy=next_token_accuracy(model, data), tokens=tokens)


def approx_retrain_target(vanilla: ModelParams, approximate: Sequences) -> RetrainTarget:
    """Vanilla perplexity and accuracy on A; the stop-rule target of unlearning runs."""
    if len(approximate) == 0:
        raise ModelInputError("approximate set must not be empty")
    target = RetrainTarget(ppl=perplexity(vanilla, approximate), acc=next_token_accuracy(vanilla, approximate))
    logger.info(f"[EVAL] approximate-retraining target ppl={target.ppl:.4f} acc={target.acc:.4f}")
    return target
