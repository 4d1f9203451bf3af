"""
Behavioral unlearning measures.
Type I compares two models' next-token distributions (Renyi, KL or JS); type II bounds the
probability a model assigns to forbidden (prefix, token) pairs.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..autodiff import PROB_FLOOR
from ..config import BehavioralConstraint
from ..errors import ModelInputError
from ..lm import ModelParams, build_forward
from ..lm.model import group_by_length

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Type2Result:
    value: float
    xi: float
    satisfied: bool
    worst_pair: int


def _floored(q: np.ndarray) -> np.ndarray:
    q = np.maximum(np.asarray(q, dtype=np.float64), PROB_FLOOR)
    return q / q.sum(axis=-1, keepdims=True)


def renyi_divergence(p, q, alpha: float):
    """(1 / (alpha - 1)) log sum p^alpha q^(1 - alpha), row-wise over the last axis.

    q is floored at PROB_FLOOR and renormalised; results are clipped at 0.
    """
    if alpha <= 0:
        raise ValueError(f"Renyi order must be positive, got {alpha}")
    if alpha == 1:
        raise ValueError("Renyi divergence of order 1 is the KL divergence; call kl_divergence")
    p = np.asarray(p, dtype=np.float64)
    q = _floored(q)
    total = np.sum(np.power(p, alpha) * np.power(q, 1.0 - alpha), axis=-1)
    value = np.maximum(np.log(total) / (alpha - 1.0), 0.0)
    return float(value) if np.ndim(value) == 0 else value


def kl_divergence(p, q):
    """sum p log(p / q) with q floored; 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = _floored(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.maximum(p, PROB_FLOOR)) - np.log(q)), 0.0)
    value = np.maximum(terms.sum(axis=-1), 0.0)
    return float(value) if np.ndim(value) == 0 else value


def js_divergence(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    value = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)
    return float(value) if np.ndim(value) == 0 else value


def prefix_distributions(model: ModelParams, prompts: Sequence[Sequence[int]]) -> np.ndarray:
    """Stack of next-token distributions after every non-empty prefix of every prompt."""
    rows: List[np.ndarray] = []
    for length, idx in group_by_length(prompts).items():
        if length < 1:
            continue
        block = [list(prompts[i]) for i in idx]
        fg = build_forward(model, block)
        rows.append(fg.graph.value(fg.probs).reshape(-1, model.vocab_size))
    if not rows:
        raise ModelInputError("prompt set has no non-empty prompts")
    return np.concatenate(rows, axis=0)


def type1_measure(
    model_a: ModelParams, model_b: ModelParams, prompts: Sequence[Sequence[int]], alpha: float
) -> float:
    """max over prompt positions of max(D_alpha(P_a || P_b), D_alpha(P_b || P_a))."""
    if not prompts:
        raise ModelInputError("type-I measure needs a non-empty prompt set")
    pa = prefix_distributions(model_a, prompts)
    pb = prefix_distributions(model_b, prompts)
    forward = renyi_divergence(pa, pb, alpha)
    backward = renyi_divergence(pb, pa, alpha)
    return float(np.max(np.maximum(forward, backward)))


def forbidden_probabilities(model: ModelParams, pairs: Sequence[Tuple[Sequence[int], int]]) -> np.ndarray:
    """P_model(token | prefix) for each forbidden pair."""
    prefixes = [list(prefix) for prefix, _ in pairs]
    out = np.zeros(len(pairs))
    for length, idx in group_by_length(prefixes).items():
        if length < 1:
            raise ModelInputError("forbidden pairs need a non-empty prefix")
        fg = build_forward(model, [prefixes[i] for i in idx])
        last = fg.graph.value(fg.probs)[:, -1, :]
        for row, i in enumerate(idx):
            out[i] = last[row, int(pairs[i][1])]
    return out


def type2_violation(model: ModelParams, constraint: BehavioralConstraint) -> Type2Result:
    """sup over forbidden pairs of P(token | prefix); satisfied iff the sup is at most xi."""
    if constraint.mode != "type-II":
        raise ValueError("type2_violation needs a type-II constraint")
    probs = forbidden_probabilities(model, constraint.forbidden)
    worst = int(np.argmax(probs))
    value = float(probs[worst])
    return Type2Result(value=value, xi=constraint.xi, satisfied=value <= constraint.xi, worst_pair=worst)
