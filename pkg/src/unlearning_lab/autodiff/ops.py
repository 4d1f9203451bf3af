"""
Op library for the computation graph.
Each op kind maps to a forward function and a vector-Jacobian product, Wengert-list style.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

PROB_FLOOR = 1e-12
GELU_C = math.sqrt(2.0 / math.pi)

Array = np.ndarray
Attrs = Dict[str, Any]


class OpKind(str, Enum):
    """Every operation a graph node can hold."""

    INPUT = "input"
    ADD = "add"
    MUL = "mul"
    MATMUL = "matmul"
    EMBEDDING = "embedding-gather"
    RELU = "relu"
    GELU = "gelu"
    LAYER_NORM = "layer-norm"
    SOFTMAX = "softmax"
    LOG = "log"
    NEGATE = "negate"
    SUM = "sum"
    MEAN = "mean"
    SCALE = "scale-by-constant"
    CROSS_ENTROPY = "cross-entropy-with-target-distribution"
    TRANSPOSE = "transpose"
    RESHAPE = "reshape"


@dataclass(frozen=True)
class OpRule:
    """Shape check, forward evaluation and backward rule for one op kind.

    check returns an error detail string (empty when the shapes are fine).
    backward receives (upstream grad, input values, output value, attrs) and
    returns one gradient per input node.
    """

    arity: int
    check: Callable[[List[Tuple[int, ...]], Attrs], str]
    forward: Callable[[List[Array], Attrs], Array]
    backward: Callable[[Array, List[Array], Array, Attrs], List[Array]]


def unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to an input's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _ok(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    return ""


def _check_broadcast(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    try:
        np.broadcast_shapes(*shapes)
    except ValueError:
        return "shapes do not broadcast"
    return ""


def _check_matmul(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    a, b = shapes
    if len(a) < 2 or len(b) < 2:
        return "matmul needs operands with at least 2 dims"
    if a[-1] != b[-2]:
        return f"inner dimensions differ ({a[-1]} vs {b[-2]})"
    try:
        np.broadcast_shapes(a[:-2], b[:-2])
    except ValueError:
        return "batch dimensions do not broadcast"
    return ""


def _check_embedding(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    (table,) = shapes
    if len(table) != 2:
        return "embedding table must be 2-D"
    ids = attrs["ids"]
    if ids.size and (ids.min() < 0 or ids.max() >= table[0]):
        return f"ids outside [0, {table[0]})"
    return ""


def _check_cross_entropy(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    (probs,) = shapes
    if tuple(attrs["target"].shape) != tuple(probs):
        return f"target shape {tuple(attrs['target'].shape)} differs from probabilities {tuple(probs)}"
    return ""


def _check_transpose(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    (x,) = shapes
    if sorted(attrs["axes"]) != list(range(len(x))):
        return f"axes {attrs['axes']} are not a permutation of {len(x)} dims"
    return ""


def _check_reshape(shapes: List[Tuple[int, ...]], attrs: Attrs) -> str:
    (x,) = shapes
    if int(np.prod(x)) != int(np.prod(attrs["shape"])):
        return f"cannot reshape {x} into {tuple(attrs['shape'])}"
    return ""


def _matmul_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    a, b = xs
    grad_a = np.matmul(g, np.swapaxes(b, -1, -2))
    grad_b = np.matmul(np.swapaxes(a, -1, -2), g)
    return [unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)]


def _embedding_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    (table,) = xs
    grad = np.zeros_like(table)
    np.add.at(grad, attrs["ids"].reshape(-1), g.reshape(-1, table.shape[1]))
    return [grad]


def _gelu_forward(xs: List[Array], attrs: Attrs) -> Array:
    x = xs[0]
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + 0.044715 * x ** 3)))


def _gelu_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    x = xs[0]
    inner = GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    d_inner = GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
    return [g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner)]


def _layer_norm_forward(xs: List[Array], attrs: Attrs) -> Array:
    x = xs[0]
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + attrs["eps"])


def _layer_norm_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    x = xs[0]
    inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + attrs["eps"])
    g_mean = g.mean(axis=-1, keepdims=True)
    gy_mean = (g * out).mean(axis=-1, keepdims=True)
    return [inv_std * (g - g_mean - out * gy_mean)]


def _softmax_forward(xs: List[Array], attrs: Attrs) -> Array:
    x = xs[0]
    shifted = np.exp(x - x.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def _softmax_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    return [out * (g - (g * out).sum(axis=-1, keepdims=True))]


def _cross_entropy_forward(xs: List[Array], attrs: Attrs) -> Array:
    probs = np.maximum(xs[0], PROB_FLOOR)
    return -(attrs["target"] * np.log(probs)).sum(axis=-1)


def _cross_entropy_backward(g: Array, xs: List[Array], out: Array, attrs: Attrs) -> List[Array]:
    p = xs[0]
    live = p >= PROB_FLOOR
    grad = np.where(live, -attrs["target"] / np.maximum(p, PROB_FLOOR), 0.0)
    return [grad * np.expand_dims(g, -1)]


OP_RULES: Dict[OpKind, OpRule] = {
    OpKind.ADD: OpRule(
        2,
        _check_broadcast,
        lambda xs, a: xs[0] + xs[1],
        lambda g, xs, out, a: [unbroadcast(g, xs[0].shape), unbroadcast(g, xs[1].shape)],
    ),
    OpKind.MUL: OpRule(
        2,
        _check_broadcast,
        lambda xs, a: xs[0] * xs[1],
        lambda g, xs, out, a: [unbroadcast(g * xs[1], xs[0].shape), unbroadcast(g * xs[0], xs[1].shape)],
    ),
    OpKind.MATMUL: OpRule(2, _check_matmul, lambda xs, a: np.matmul(xs[0], xs[1]), _matmul_backward),
    OpKind.EMBEDDING: OpRule(1, _check_embedding, lambda xs, a: xs[0][a["ids"]], _embedding_backward),
    OpKind.RELU: OpRule(
        1, _ok, lambda xs, a: np.maximum(xs[0], 0.0), lambda g, xs, out, a: [g * (xs[0] > 0)]
    ),
    OpKind.GELU: OpRule(1, _ok, _gelu_forward, _gelu_backward),
    OpKind.LAYER_NORM: OpRule(1, _ok, _layer_norm_forward, _layer_norm_backward),
    OpKind.SOFTMAX: OpRule(1, _ok, _softmax_forward, _softmax_backward),
    OpKind.LOG: OpRule(1, _ok, lambda xs, a: np.log(xs[0]), lambda g, xs, out, a: [g / xs[0]]),
    OpKind.NEGATE: OpRule(1, _ok, lambda xs, a: -xs[0], lambda g, xs, out, a: [-g]),
    OpKind.SUM: OpRule(
        1, _ok, lambda xs, a: np.asarray(xs[0].sum()), lambda g, xs, out, a: [np.full(xs[0].shape, float(g))]
    ),
    OpKind.MEAN: OpRule(
        1,
        _ok,
        lambda xs, a: np.asarray(xs[0].mean()),
        lambda g, xs, out, a: [np.full(xs[0].shape, float(g) / xs[0].size)],
    ),
    OpKind.SCALE: OpRule(1, _ok, lambda xs, a: xs[0] * a["c"], lambda g, xs, out, a: [g * a["c"]]),
    OpKind.CROSS_ENTROPY: OpRule(1, _check_cross_entropy, _cross_entropy_forward, _cross_entropy_backward),
    OpKind.TRANSPOSE: OpRule(
        1,
        _check_transpose,
        lambda xs, a: np.transpose(xs[0], a["axes"]),
        lambda g, xs, out, a: [np.transpose(g, np.argsort(a["axes"]))],
    ),
    OpKind.RESHAPE: OpRule(
        1,
        _check_reshape,
        lambda xs, a: xs[0].reshape(a["shape"]),
        lambda g, xs, out, a: [g.reshape(xs[0].shape)],
    ),
}


def rule_for(op: OpKind) -> Optional[OpRule]:
    """Rule registered for an op kind; INPUT has none."""
    return OP_RULES.get(op)

