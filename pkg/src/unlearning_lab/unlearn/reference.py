"""
Reference distributions Q for the forget term.
"""

from typing import Sequence

import numpy as np

from ..config import MethodSpec
from ..errors import MethodSpecError
from ..lm import ModelParams, build_forward, next_token_distribution


def adversarial_from_probs(probs: np.ndarray, true_token: int, k: int = 1) -> np.ndarray:
    """The k most likely tokens other than true_token, most likely first, lowest id on ties."""
    probs = np.asarray(probs, dtype=np.float64)
    V = probs.shape[-1]
    if V < 2:
        raise MethodSpecError("an adversarial token needs a vocabulary of at least two tokens")
    masked = probs.copy()
    masked[true_token] = -np.inf
    order = np.argsort(-masked, kind="stable")
    return order[: min(k, V - 1)]


def adversarial_token(model: ModelParams, prefix: Sequence[int], true_token: int) -> int:
    """argmax over a != true_token of P(a | prefix)."""
    return int(adversarial_from_probs(next_token_distribution(model, prefix), true_token)[0])


def reference_distribution(
    spec: MethodSpec, model: ModelParams, prefix: Sequence[int], true_token: int
) -> np.ndarray:
    """Q(. | prefix) for one position."""
    V = model.vocab_size
    if spec.reference == "delta-true-token":
        q = np.zeros(V)
        q[true_token] = 1.0
        return q
    if spec.reference == "uniform":
        return np.full(V, 1.0 / V)
    q = np.zeros(V)
    picks = adversarial_from_probs(next_token_distribution(model, prefix), true_token, spec.adversarial_k)
    q[picks] = 1.0 / len(picks)
    return q


def reference_targets(spec: MethodSpec, model: ModelParams, block: np.ndarray) -> np.ndarray:
    """Q for every predicted position of a (B, L) block, shape (B, L-1, V)."""
    block = np.asarray(block, dtype=np.int64)
    V = model.vocab_size
    B, L = block.shape
    if spec.reference == "delta-true-token":
        return np.eye(V)[block[:, 1:]]
    if spec.reference == "uniform":
        return np.full((B, L - 1, V), 1.0 / V)
    if V < 2:
        raise MethodSpecError("an adversarial token needs a vocabulary of at least two tokens")

    fg = build_forward(model, block[:, :-1])
    masked = fg.graph.value(fg.probs).copy()
    true = block[:, 1:]
    np.put_along_axis(masked, true[..., None], -np.inf, axis=-1)
    k = min(spec.adversarial_k, V - 1)
    picks = np.argsort(-masked, axis=-1, kind="stable")[..., :k]
    targets = np.zeros((B, L - 1, V))
    np.put_along_axis(targets, picks, 1.0 / k, axis=-1)
    return targets
