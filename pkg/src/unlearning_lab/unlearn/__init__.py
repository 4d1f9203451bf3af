from .newton import bigram_nll_gradient, newton_step, newton_unlearn_bigram
from .objective import (
    ObjectiveValue,
    StepOutcome,
    forget_items,
    kl_items,
    kl_retain_term,
    retain_items,
    unified_step,
    unified_update,
    unlearning_gradients,
)
from .reference import adversarial_from_probs, adversarial_token, reference_distribution, reference_targets
from .runner import plan_batches, retain_data, retrain_oracle, run_behavioral_unlearning, run_unlearning

__all__ = [
    "ObjectiveValue",
    "StepOutcome",
    "adversarial_from_probs",
    "adversarial_token",
    "bigram_nll_gradient",
    "forget_items",
    "kl_items",
    "kl_retain_term",
    "newton_step",
    "newton_unlearn_bigram",
    "plan_batches",
    "reference_distribution",
    "reference_targets",
    "retain_data",
    "retain_items",
    "retrain_oracle",
    "run_behavioral_unlearning",
    "run_unlearning",
    "unified_step",
    "unified_update",
    "unlearning_gradients",
]
