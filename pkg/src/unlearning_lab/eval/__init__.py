from .behavioral import (
    Type2Result,
    forbidden_probabilities,
    js_divergence,
    kl_divergence,
    prefix_distributions,
    renyi_divergence,
    type1_measure,
    type2_violation,
)
from .metrics import (
    RetrainTarget,
    SplitScore,
    approx_retrain_target,
    next_token_accuracy,
    perplexity,
    split_score,
)
from .mia import MiaResult, auc, mia_auc_sweep, mia_table, mia_table_csv, min_k_from_log_probs, min_k_score

__all__ = [
    "MiaResult",
    "RetrainTarget",
    "SplitScore",
    "Type2Result",
    "approx_retrain_target",
    "auc",
    "forbidden_probabilities",
    "js_divergence",
    "kl_divergence",
    "mia_auc_sweep",
    "mia_table",
    "mia_table_csv",
    "min_k_from_log_probs",
    "min_k_score",
    "next_token_accuracy",
    "perplexity",
    "prefix_distributions",
    "renyi_divergence",
    "split_score",
    "type1_measure",
    "type2_violation",
]
