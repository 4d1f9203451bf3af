"""
Two-phase learning-rate search: a coarse grid brackets the forget-ppl target, a fine grid picks the lr.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..config import LrSearchSpec, UnlearnRun
from ..errors import BracketingError
from ..eval import RetrainTarget, perplexity
from ..lm import ModelParams
from ..state import SeedContext
from ..unlearn import run_unlearning
from .pipeline import unlearn_seed

logger = logging.getLogger("Harness.Search")

PplResponse = Callable[[float], float]


def lr_guideline_search(
    response: PplResponse,
    coarse_grid: Sequence[float],
    target: float,
    fine_points: int = 10,
    tolerance: float = 0.02,
) -> float:
    """Pick the lr whose forget-set perplexity lands closest to `target`.

    `response(lr)` runs unlearning at `lr` and returns the forget-set perplexity.
    The coarse grid is scanned for the first neighbouring pair whose perplexities
    straddle the target; `fine_points` evenly spaced lrs strictly inside that bracket
    are then evaluated and the lr (endpoints included) minimizing |ppl - target| wins.
    """
    grid = [float(lr) for lr in coarse_grid]
    if not grid:
        raise ValueError("coarse grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("coarse grid must be strictly increasing")

    ppls: Dict[float, float] = {}
    for lr in grid:
        ppls[lr] = float(response(lr))
        logger.info(f"[SEARCH] coarse lr {lr:g}: forget ppl {ppls[lr]:.4f} (target {target:.4f})")

    def within(lr: float) -> bool:
        return abs(ppls[lr] - target) <= tolerance * target

    if len(grid) == 1:
        if within(grid[0]):
            return grid[0]
        raise BracketingError(target, ppls)

    bracket: Optional[tuple] = None
    for lo, hi in zip(grid, grid[1:]):
        if (ppls[lo] - target) * (ppls[hi] - target) <= 0:
            bracket = (lo, hi)
            break
    if bracket is None:
        raise BracketingError(target, ppls)

    lo, hi = bracket
    candidates = {lo: ppls[lo], hi: ppls[hi]}
    for lr in np.linspace(lo, hi, fine_points + 2)[1:-1]:
        lr = float(lr)
        candidates[lr] = float(response(lr))
        logger.debug(f"[SEARCH] fine lr {lr:g}: forget ppl {candidates[lr]:.4f}")
    best = min(sorted(candidates), key=lambda lr: abs(candidates[lr] - target))
    logger.info(f"[SEARCH] chose lr {best:g} (forget ppl {candidates[best]:.4f}) inside [{lo:g}, {hi:g}]")
    return best


def search_learning_rate(
    ctx: SeedContext, vanilla: ModelParams, run: UnlearnRun, target: RetrainTarget, spec: LrSearchSpec
) -> float:
    """Run the lr search for one method with the step count fixed."""

    def response(lr: float) -> float:
        trial = run.model_copy(update={"learning_rate": lr, "steps": spec.steps, "stop_rule": "fixed-steps"})
        model, _ = run_unlearning(vanilla, ctx.splits, trial, seed=unlearn_seed(ctx.seed, run.method.name))
        return perplexity(model, ctx.splits.forget)

    return lr_guideline_search(response, spec.coarse_grid, target.ppl, spec.fine_points, spec.tolerance)
