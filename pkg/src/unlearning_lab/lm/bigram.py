"""
Convex softmax-bigram language model.
P(b | ..., a) = softmax(W[a])_b, so the NLL is a sum of independent multinomial logistic losses.
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from ..autodiff import CompGraph, NodeId
from .params import Arch, ModelParams, Role

MLE_FLOOR = 1e-30


def init_bigram(vocab_size: int) -> ModelParams:
    """All-zero logits: the uniform model."""
    return ModelParams(
        arch=Arch.BIGRAM,
        vocab_size=vocab_size,
        arrays={"W": np.zeros((vocab_size, vocab_size))},
        role=Role.VANILLA,
    )


def bigram_counts(data: Sequence[Sequence[int]], vocab_size: int) -> np.ndarray:
    """Transition counts C[a, b] over every adjacent pair of every sequence."""
    counts = np.zeros((vocab_size, vocab_size))
    for seq in data:
        ids = np.asarray(seq, dtype=np.int64)
        if ids.size >= 2:
            np.add.at(counts, (ids[:-1], ids[1:]), 1.0)
    return counts


def bigram_mle(data: Sequence[Sequence[int]], vocab_size: int, role: Role = Role.VANILLA) -> ModelParams:
    """Closed-form NLL minimiser: W[a] = log of the empirical transition row.

    Unseen transitions sit at log(MLE_FLOOR) and unseen contexts stay uniform, so
    the gradient norm is of order count * MLE_FLOOR rather than exactly zero.
    """
    counts = bigram_counts(data, vocab_size)
    totals = counts.sum(axis=1, keepdims=True)
    rows = np.where(totals > 0, counts / np.maximum(totals, 1.0), 1.0 / vocab_size)
    W = np.log(np.maximum(rows, MLE_FLOOR))
    W -= W.mean(axis=1, keepdims=True)
    return ModelParams(arch=Arch.BIGRAM, vocab_size=vocab_size, arrays={"W": W}, role=role)


def build_bigram_graph(g: CompGraph, model: ModelParams, ids: np.ndarray) -> Tuple[Dict[str, NodeId], NodeId]:
    """Record logits = W[ids] and return (parameter nodes, probability node of shape (B, L, V))."""
    W = g.input(model.arrays["W"], name="W")
    logits = g.embedding(W, ids)
    return {"W": W}, g.softmax(logits)
