"""
First-order optimizers and global-norm gradient clipping.
"""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .params import ModelParams

logger = logging.getLogger(__name__)

Grads = Dict[str, np.ndarray]


def global_norm(grads: Grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: Grads, max_norm: Optional[float]) -> Tuple[Grads, float, bool]:
    """Rescale grads so their joint L2 norm is at most max_norm; returns (grads, pre-clip norm, clipped)."""
    norm = global_norm(grads)
    if max_norm is None or not np.isfinite(norm) or norm <= max_norm:
        return grads, norm, False
    factor = max_norm / norm
    return {k: g * factor for k, g in grads.items()}, norm, True


class Optimizer:
    """Stateful update rule producing new parameter snapshots."""

    name = "base"

    def __init__(self):
        self.t = 0

    def update(self, model: ModelParams, grads: Grads, lr: float) -> ModelParams:
        raise NotImplementedError

    def state(self) -> Dict[str, Any]:
        """State snapshot; `restore` undoes every update made after it."""
        return {"t": self.t}

    def restore(self, state: Dict[str, Any]) -> None:
        self.t = state["t"]


class Sgd(Optimizer):
    name = "sgd"

    def update(self, model: ModelParams, grads: Grads, lr: float) -> ModelParams:
        self.t += 1
        return model.with_arrays({k: w - lr * grads[k] for k, w in model.arrays.items()})


class Adam(Optimizer):
    name = "adam"

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__()
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: Grads = {}
        self.v: Grads = {}

    def update(self, model: ModelParams, grads: Grads, lr: float) -> ModelParams:
        self.t += 1
        if not self.m:
            self.m = {k: np.zeros_like(w) for k, w in model.arrays.items()}
            self.v = {k: np.zeros_like(w) for k, w in model.arrays.items()}
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        new = {}
        for k, w in model.arrays.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            step = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            new[k] = w - lr * step
        return model.with_arrays(new)

    def state(self) -> Dict[str, Any]:
        return {"t": self.t, "m": dict(self.m), "v": dict(self.v)}

    def restore(self, state: Dict[str, Any]) -> None:
        self.t = state["t"]
        self.m = dict(state["m"])
        self.v = dict(state["v"])


def make_optimizer(kind: str, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Optimizer:
    if kind == "sgd":
        return Sgd()
    if kind == "adam":
        return Adam(beta1, beta2, eps)
    raise ValueError(f"unknown optimizer '{kind}'")
