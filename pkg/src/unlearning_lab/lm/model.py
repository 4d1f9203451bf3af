"""
Model front end: forward graphs, next-token distributions, NLL and loss gradients.
Both architectures expose probabilities of shape (B, L, V) for inputs of shape (B, L).
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..autodiff import PROB_FLOOR, CompGraph, NodeId
from ..config import ModelSpec
from ..errors import ModelInputError
from .bigram import build_bigram_graph, init_bigram
from .decoder import build_decoder_graph, init_decoder
from .params import Arch, ModelParams

logger = logging.getLogger(__name__)

Sequences = Sequence[Sequence[int]]


@dataclass
class ForwardGraph:
    graph: CompGraph
    params: Dict[str, NodeId]
    probs: NodeId


def init_model(spec: ModelSpec, vocab_size: int, seed: int) -> ModelParams:
    if spec.arch == Arch.BIGRAM.value:
        return init_bigram(vocab_size)
    return init_decoder(spec, vocab_size, seed)


def check_tokens(model: ModelParams, ids) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= model.vocab_size):
        bad = ids[(ids < 0) | (ids >= model.vocab_size)].flat[0]
        raise ModelInputError(f"token id {bad} is outside the vocabulary [0, {model.vocab_size})")
    return ids


def build_forward(model: ModelParams, ids, evaluate: bool = True) -> ForwardGraph:
    """Record the model on a (B, L) block of equal-length inputs, evaluating it unless told not to."""
    ids = check_tokens(model, ids)
    if ids.ndim != 2 or ids.shape[1] < 1:
        raise ModelInputError(f"inputs must be a non-empty (batch, length) block, got shape {ids.shape}")
    if model.arch == Arch.TINY_DECODER and ids.shape[1] > model.context_length:
        raise ModelInputError(f"input length {ids.shape[1]} exceeds context length {model.context_length}")
    g = CompGraph()
    if model.arch == Arch.BIGRAM:
        params, probs = build_bigram_graph(g, model, ids)
    else:
        params, probs = build_decoder_graph(g, model, ids)
    if evaluate:
        g.forward()
    return ForwardGraph(graph=g, params=params, probs=probs)


def next_token_distribution(model: ModelParams, prefix: Sequence[int]) -> np.ndarray:
    """P(. | prefix) as a length-V vector."""
    if len(prefix) == 0:
        raise ModelInputError("prefix must contain at least one token")
    if model.arch == Arch.TINY_DECODER and len(prefix) >= model.context_length:
        raise ModelInputError(
            f"prefix length {len(prefix)} must be shorter than context length {model.context_length}"
        )
    if model.arch == Arch.BIGRAM:
        prefix = list(prefix)[-1:]
    fg = build_forward(model, [list(prefix)])
    return fg.graph.value(fg.probs)[0, -1].copy()


def group_by_length(data: Sequences) -> Dict[int, List[int]]:
    """Indices of sequences keyed by length, in first-seen order."""
    groups: Dict[int, List[int]] = defaultdict(list)
    for i, seq in enumerate(data):
        groups[len(seq)].append(i)
    return dict(groups)


def batch_position_distributions(model: ModelParams, data: Sequences) -> List[np.ndarray]:
    """For each sequence w_1..w_T the (T-1, V) predictive distributions of w_2..w_T."""
    out: List[np.ndarray] = [np.zeros((0, model.vocab_size))] * len(data)
    for length, idx in group_by_length(data).items():
        if length < 2:
            continue
        block = check_tokens(model, [data[i] for i in idx])
        fg = build_forward(model, block[:, :-1])
        probs = fg.graph.value(fg.probs)
        for row, i in enumerate(idx):
            out[i] = probs[row].copy()
    return out


def position_distributions(model: ModelParams, seq: Sequence[int]) -> np.ndarray:
    return batch_position_distributions(model, [seq])[0]


def batch_token_log_probs(model: ModelParams, data: Sequences) -> List[np.ndarray]:
    """Per-position log P(w_{t+1} | w_1..w_t), floored at PROB_FLOOR."""
    result = []
    for seq, probs in zip(data, batch_position_distributions(model, data)):
        if len(seq) < 2:
            result.append(np.zeros(0))
            continue
        nxt = np.asarray(seq[1:], dtype=np.int64)
        result.append(np.log(np.maximum(probs[np.arange(len(nxt)), nxt], PROB_FLOOR)))
    return result


def token_log_probs(model: ModelParams, seq: Sequence[int]) -> np.ndarray:
    return batch_token_log_probs(model, [seq])[0]


def sequence_nll(model: ModelParams, seq: Sequence[int]) -> float:
    """-sum_t log P(w_{t+1} | w_1..w_t) in nats."""
    if len(seq) < 2:
        raise ModelInputError("sequence_nll needs at least two tokens")
    return float(-token_log_probs(model, seq).sum())


def total_nll(model: ModelParams, data: Sequences) -> Tuple[float, int]:
    """Summed NLL and number of predicted tokens over a dataset."""
    logps = batch_token_log_probs(model, data)
    return float(-sum(lp.sum() for lp in logps)), int(sum(lp.size for lp in logps))


def mean_nll(model: ModelParams, data: Sequences) -> float:
    nll, tokens = total_nll(model, data)
    if tokens == 0:
        raise ModelInputError("dataset has no predicted positions")
    return nll / tokens


def one_hot_targets(block: np.ndarray, vocab_size: int) -> np.ndarray:
    """Targets of shape (B, L-1, V) for next-token prediction on a (B, L) block."""
    return np.eye(vocab_size)[block[:, 1:]]


def cross_entropy_gradients(
    model: ModelParams,
    items: Sequence[Tuple[np.ndarray, np.ndarray]],
    coefficient: float = 1.0,
    ascent: bool = False,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Value and parameter gradients of coefficient * (+/-) mean_t CE(target_t, P_t).

    items are (block (B, L), targets (B, L-1, V)) pairs. The mean runs over active
    positions only (rows whose target sums to a positive mass), so zeroed target rows
    mask a position out of the term.
    """
    active = int(sum((t.sum(axis=-1) > 0).sum() for _, t in items))
    grads = {name: np.zeros_like(arr) for name, arr in model.arrays.items()}
    if active == 0:
        return 0.0, grads
    value = 0.0
    for block, targets in items:
        fg = build_forward(model, block[:, :-1], evaluate=False)
        g = fg.graph
        term = g.sum(g.cross_entropy(fg.probs, targets))
        if ascent:
            term = g.negate(term)
        root = g.scale(term, coefficient / active)
        g.forward()
        value += float(g.value(root))
        input_grads = g.backward(root)
        for name, node_id in fg.params.items():
            grads[name] += input_grads[node_id]
    return value, grads


def nll_gradients(model: ModelParams, data: Sequences) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean per-token NLL of a batch and its gradient."""
    items = []
    for length, idx in group_by_length(data).items():
        if length < 2:
            continue
        block = check_tokens(model, [data[i] for i in idx])
        items.append((block, one_hot_targets(block, model.vocab_size)))
    return cross_entropy_gradients(model, items)
