from .bigram import bigram_counts, bigram_mle, init_bigram
from .checkpoint import load_checkpoint, save_checkpoint
from .decoder import init_decoder
from .model import (
    batch_position_distributions,
    batch_token_log_probs,
    build_forward,
    cross_entropy_gradients,
    init_model,
    mean_nll,
    next_token_distribution,
    nll_gradients,
    position_distributions,
    sequence_nll,
    token_log_probs,
    total_nll,
)
from .optim import Adam, Sgd, clip_by_global_norm, global_norm, make_optimizer
from .params import Arch, ModelParams, Role
from .training import TrainResult, fit, train, training_step
from .vocab import CharVocab

__all__ = [
    "Adam",
    "Arch",
    "CharVocab",
    "ModelParams",
    "Role",
    "Sgd",
    "TrainResult",
    "batch_position_distributions",
    "batch_token_log_probs",
    "bigram_counts",
    "bigram_mle",
    "build_forward",
    "clip_by_global_norm",
    "cross_entropy_gradients",
    "fit",
    "global_norm",
    "init_bigram",
    "init_decoder",
    "init_model",
    "load_checkpoint",
    "make_optimizer",
    "mean_nll",
    "next_token_distribution",
    "nll_gradients",
    "position_distributions",
    "save_checkpoint",
    "sequence_nll",
    "token_log_probs",
    "total_nll",
    "train",
    "training_step",
]
