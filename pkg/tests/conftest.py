"""
Shared fixtures: tiny corpora, small models and a smoke experiment config.
"""

import numpy as np
import pytest

from unlearning_lab.config import (
    BehavioralSettings,
    ExperimentConfig,
    GeneratorSpec,
    MiaConfig,
    ModelSpec,
    SplitSpec,
    TrainConfig,
    UnlearnRun,
)
from unlearning_lab.lm import init_model

VOCAB = 5


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def token_corpus(rng):
    """Twelve id sequences over a 5-token vocabulary, two lengths."""
    return [rng.integers(0, VOCAB, size=8).tolist() for _ in range(8)] + [
        rng.integers(0, VOCAB, size=6).tolist() for _ in range(4)
    ]


@pytest.fixture
def decoder_spec():
    return ModelSpec(arch="tiny-decoder", layers=1, dim=16, heads=2, context_length=16)


@pytest.fixture
def decoder(decoder_spec):
    return init_model(decoder_spec, VOCAB, seed=0)


@pytest.fixture
def bigram():
    return init_model(ModelSpec(arch="bigram"), VOCAB, seed=0)


@pytest.fixture
def smoke_config(tmp_path):
    """An experiment small enough to run end to end in a unit test."""
    return ExperimentConfig(
        generator=GeneratorSpec(alphabet="abcde", num_sequences=40, sequence_length=10, matrix_seed=3),
        splits=SplitSpec(forget_fraction=0.1, general_size=6, approx_size=6),
        model=ModelSpec(arch="tiny-decoder", layers=1, dim=16, heads=2, context_length=16),
        train=TrainConfig(epochs=2, batch_size=8, learning_rate=1e-2),
        methods=[
            UnlearnRun(method="gradient-ascent", stop_rule="fixed-steps", steps=2),
            UnlearnRun(method="ga-kl-in-distribution", stop_rule="fixed-steps", steps=2),
        ],
        mia=MiaConfig(k_percents=[50, 100]),
        behavioral=BehavioralSettings(general_prompt_sample=2, num_forbidden_pairs=2, step_budget=3),
        seeds=[0],
        output_dir=str(tmp_path / "runs"),
    )
