"""
Newton-step unlearning for the convex bigram.
The summed NLL on D∖U separates per context token a, with gradient n_a p - c_a and
Hessian n_a (diag p - p p^T) for p = softmax(W[a]).
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ModelInputError, SingularHessianBlockError
from ..lm import Arch, ModelParams, Role, bigram_counts
from ..lm.optim import global_norm

logger = logging.getLogger(__name__)

DEFAULT_RELATIVE_DAMPING = 1e-6
RESIDUAL_TOLERANCE = 1e-8


def _softmax_rows(W: np.ndarray) -> np.ndarray:
    z = np.exp(W - W.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def bigram_nll_gradient(model: ModelParams, counts: np.ndarray) -> np.ndarray:
    """Gradient of the summed bigram NLL for transition counts C: n_a p_a - C_a per row."""
    p = _softmax_rows(model.arrays["W"])
    return counts.sum(axis=1, keepdims=True) * p - counts


def newton_step(
    model: ModelParams, counts: np.ndarray, damping: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Damped Newton direction per context row; returns (step, per-row damping used).

    damping=None uses DEFAULT_RELATIVE_DAMPING times each block's mean diagonal.
    damping=0 solves by least squares, the all-ones direction being a softmax gauge freedom.
    """
    W = model.arrays["W"]
    V = W.shape[0]
    p = _softmax_rows(W)
    totals = counts.sum(axis=1)
    step = np.zeros_like(W)
    used = np.zeros(V)
    for a in range(V):
        n_a = totals[a]
        if n_a == 0:
            continue
        pa = p[a]
        grad = n_a * pa - counts[a]
        hessian = n_a * (np.diag(pa) - np.outer(pa, pa))
        lam = DEFAULT_RELATIVE_DAMPING * float(np.mean(np.diag(hessian))) if damping is None else float(damping)
        used[a] = lam
        block = hessian + lam * np.eye(V)
        try:
            if lam == 0.0:
                delta, *_ = np.linalg.lstsq(block, grad, rcond=None)
            else:
                delta = np.linalg.solve(block, grad)
        except np.linalg.LinAlgError:
            raise SingularHessianBlockError(a, lam) from None
        residual = float(np.linalg.norm(block @ delta - grad))
        if not np.all(np.isfinite(delta)) or residual > RESIDUAL_TOLERANCE * max(1.0, float(np.linalg.norm(grad))):
            raise SingularHessianBlockError(a, lam)
        step[a] = delta
    return step, used


def newton_unlearn_bigram(
    vanilla: ModelParams,
    train: Sequence[Sequence[int]],
    forget: Sequence[Sequence[int]],
    damping: Optional[float] = None,
) -> ModelParams:
    """One damped Newton step on the NLL of D∖U, starting from the vanilla bigram.

    D∖U is taken as a multiset difference of transition counts, so `forget` must be
    contained in `train`.
    """
    if vanilla.arch != Arch.BIGRAM:
        raise ModelInputError("Newton unlearning is defined for the bigram model only")
    V = vanilla.vocab_size
    counts_d = bigram_counts(train, V)
    counts = counts_d - bigram_counts(forget, V)
    if np.any(counts < 0):
        raise ModelInputError("forget sequences are not contained in the training data")

    start_norm = global_norm({"W": bigram_nll_gradient(vanilla, counts_d)})
    if start_norm > 1e-6:
        logger.warning(f"[NEWTON] vanilla bigram is not stationary on D (grad norm {start_norm:.3e})")

    step, used = newton_step(vanilla, counts, damping)
    logger.info(
        f"[NEWTON] step norm {np.linalg.norm(step):.3e}, damping range [{used.min():.3e}, {used.max():.3e}]"
    )
    return vanilla.with_arrays({"W": vanilla.arrays["W"] - step}, role=Role.UNLEARNED)
