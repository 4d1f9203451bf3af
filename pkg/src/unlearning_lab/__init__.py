"""
Unlearning Lab
A desk-scale machine unlearning lab: autodiff, tiny language models, unlearning methods and their evaluation.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, MethodSpec, UnlearnRun
from .harness import run_experiment, sweep
from .unlearn import run_unlearning, unified_step

__all__ = [
    "ExperimentConfig",
    "MethodSpec",
    "UnlearnRun",
    "run_experiment",
    "run_unlearning",
    "sweep",
    "unified_step",
]
