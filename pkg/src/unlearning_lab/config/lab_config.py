"""
Configuration classes for the Unlearning Lab.
Corpus, model, training, unlearning, evaluation and experiment settings.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from langchain_core.runnables import RunnableConfig
from pydantic import BaseModel, Field, field_validator, model_validator

from ..hashing import sha256_hex

logger = logging.getLogger(__name__)

# Load environment variables from the project .env file
env_path = Path(__file__).parent.parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path, override=False)
    logger.debug(f"Loaded environment variables from {env_path}")

OUTPUT_DIR_ENV = "UNLEARNING_LAB_OUTPUT_DIR"
SEEDS_ENV = "UNLEARNING_LAB_SEEDS"


class GeneratorSpec(BaseModel):
    """Synthetic corpus generator: an order-k Markov chain or a template grammar."""

    kind: Literal["markov-chain", "template-grammar"] = Field(
        default="markov-chain", description="Which generator family produces the sequences"
    )
    alphabet: str = Field(
        default="abcdefghijklmnop",
        description="Characters of the Markov chain states; one character per token",
    )
    order: int = Field(default=1, ge=1, le=3, description="Markov order k (states are k-grams)")
    transition: Optional[List[List[float]]] = Field(
        default=None,
        description="Row-stochastic matrix of shape (V**order, V); drawn from a Dirichlet when omitted",
    )
    initial: Optional[List[float]] = Field(
        default=None, description="Distribution over the V**order start states; uniform when omitted"
    )
    dirichlet_concentration: float = Field(
        default=0.3, gt=0, description="Concentration of the Dirichlet used to draw transition rows"
    )
    matrix_seed: int = Field(default=0, description="Seed for the Dirichlet transition draw")
    templates: List[str] = Field(
        default_factory=list, description="Template-grammar patterns with {slot} placeholders"
    )
    slots: Dict[str, List[str]] = Field(
        default_factory=dict, description="Fillers for each template slot, chosen uniformly"
    )
    num_sequences: int = Field(default=200, ge=2, description="Number of sequences in the training corpus D")
    sequence_length: int = Field(default=32, ge=2, description="Tokens per sequence")
    seed: int = Field(default=0, description="Base sampling seed; combined with the experiment seed")
    entropy_rate: Optional[float] = Field(
        default=None,
        description="Stored entropy rate in nats/token (Markov only); must match the matrix when given",
    )

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "GeneratorSpec":
        if self.kind == "template-grammar":
            if not self.templates:
                raise ValueError("template-grammar generator needs at least one template")
        elif len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ValueError("alphabet must be non-empty with unique characters")
        return self


class SplitSpec(BaseModel):
    """Sizes of the forget, retain-sample, general and approximate splits."""

    forget_fraction: float = Field(default=0.05, description="|U| / |D|, strictly between 0 and 1")
    retain_sample_size: Optional[int] = Field(
        default=None, ge=1, description="|R|; defaults to |U| (token-matched for equal-length sequences)"
    )
    general_size: int = Field(default=50, ge=1, description="|G|, held-out part of D∖U for evaluation")
    approx_size: int = Field(default=20, ge=1, description="|A|, fresh sequences from the same generator")


class ModelSpec(BaseModel):
    """Architecture of the language model."""

    arch: Literal["tiny-decoder", "bigram"] = Field(default="tiny-decoder", description="Model family")
    layers: int = Field(default=2, ge=1, le=2, description="Decoder blocks")
    dim: int = Field(default=32, ge=16, le=64, description="Model width")
    heads: int = Field(default=2, ge=1, description="Attention heads")
    context_length: int = Field(default=64, ge=2, description="Maximum sequence length T_max")
    activation: Literal["gelu", "relu"] = Field(default="gelu", description="MLP non-linearity")
    init_std: float = Field(default=0.02, gt=0, description="Std of the Gaussian weight init")

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelSpec":
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} is not divisible by heads {self.heads}")
        return self


class TrainConfig(BaseModel):
    """Optimizer settings for NLL training."""

    learning_rate: float = Field(default=3e-3, gt=0, description="Step size")
    batch_size: int = Field(default=16, ge=1, description="Sequences per batch")
    epochs: int = Field(default=30, ge=1, description="Passes over the training data")
    optimizer: Literal["sgd", "adam"] = Field(default="adam", description="Update rule")
    beta1: float = Field(default=0.9, ge=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(default=0.999, ge=0, lt=1, description="Adam second-moment decay")
    eps: float = Field(default=1e-8, gt=0, description="Adam denominator epsilon")
    seed: int = Field(default=0, description="Initialisation and shuffling seed")
    max_grad_norm: Optional[float] = Field(default=None, gt=0, description="Global-norm clip, off when None")


class MethodSpec(BaseModel):
    """One instance of the unified unlearning objective."""

    name: str = Field(default="custom", description="Label used in reports and tables")
    reference: Literal["delta-true-token", "uniform", "delta-adversarial"] = Field(
        default="delta-true-token", description="Reference distribution family Q"
    )
    forget_sign: Literal["ascent", "none"] = Field(
        default="ascent", description="'ascent' maximises the forget log-likelihood term's loss"
    )
    retain_term: Literal["none", "descent-on-R", "kl-to-vanilla-on-R"] = Field(
        default="none", description="Second term of the objective"
    )
    retain_data: Literal["in-distribution", "general"] = Field(
        default="in-distribution", description="R (in-distribution) or G (general) feeds the retain term"
    )
    forget_coefficient: float = Field(default=1.0, description="Weight of the forget term")
    retain_coefficient: float = Field(default=1.0, description="Weight of the retain term")
    adversarial_k: int = Field(
        default=1, ge=1, description="Top-k adversarial tokens; 1 is the delta-adversarial reference"
    )

    @model_validator(mode="after")
    def _check_adversarial_k(self) -> "MethodSpec":
        if self.adversarial_k > 1 and self.reference != "delta-adversarial":
            raise ValueError("adversarial_k > 1 only applies to the delta-adversarial reference")
        return self

    @property
    def is_hybrid(self) -> bool:
        return self.retain_term != "none"

    @property
    def cost_kind(self) -> str:
        """Row of the FLOPs table this method is charged under."""
        if self.is_hybrid:
            return "hybrid"
        if self.reference == "delta-adversarial":
            return "adversarial"
        return "first-order"

    @classmethod
    def preset(cls, name: str) -> "MethodSpec":
        from ..errors import UnknownMethodError

        if name not in METHOD_PRESETS:
            raise UnknownMethodError(name, list(METHOD_PRESETS))
        return cls(name=name, **METHOD_PRESETS[name])


METHOD_PRESETS: Dict[str, Dict[str, Any]] = {
    "gradient-ascent": {"reference": "delta-true-token", "forget_sign": "ascent"},
    "random-labels": {"reference": "uniform", "forget_sign": "none"},
    "adversarial": {"reference": "delta-adversarial", "forget_sign": "none"},
    "ga-descent-in-distribution": {"retain_term": "descent-on-R", "retain_data": "in-distribution"},
    "ga-descent-general": {"retain_term": "descent-on-R", "retain_data": "general"},
    "ga-kl-in-distribution": {"retain_term": "kl-to-vanilla-on-R", "retain_data": "in-distribution"},
    "ga-kl-general": {"retain_term": "kl-to-vanilla-on-R", "retain_data": "general"},
}


class UnlearnRun(BaseModel):
    """One unlearning run: method, optimizer and stop rule."""

    method: MethodSpec = Field(default_factory=lambda: MethodSpec.preset("gradient-ascent"))
    learning_rate: float = Field(default=1e-2, ge=0, description="Unlearning step size")
    steps: int = Field(
        default=4, ge=0, description="Optimizer updates per pass over U (U is split into this many batches)"
    )
    optimizer: Literal["sgd", "adam"] = Field(default="adam", description="Update rule")
    max_grad_norm: Optional[float] = Field(default=1.0, gt=0, description="Global-norm clip during unlearning")
    stop_rule: Literal["fixed-steps", "reach-forget-ppl-target"] = Field(
        default="reach-forget-ppl-target", description="Run exactly `steps` updates or chase a ppl target"
    )
    target: Optional[float] = Field(
        default=None, gt=0, description="Forget-set ppl target; the approximate-retraining target when None"
    )
    tolerance: float = Field(
        default=0.02, ge=0, lt=1, description="Relative half-width of the band the target rule lands the forget ppl in"
    )
    step_budget: int = Field(default=64, ge=0, description="Maximum updates under the target stop rule")

    @field_validator("method", mode="before")
    @classmethod
    def _method_from_name(cls, value: Union[str, Dict[str, Any], MethodSpec]):
        if isinstance(value, str):
            return MethodSpec.preset(value)
        if isinstance(value, dict) and set(value) == {"name"}:
            return MethodSpec.preset(value["name"])
        return value


class MiaConfig(BaseModel):
    """Min-K% Prob membership inference settings."""

    k_percents: List[float] = Field(
        default_factory=lambda: [10.0 * i for i in range(1, 11)], description="k values swept, each in (0, 100]"
    )
    chunking: Literal["sequence"] = Field(default="sequence", description="One sequence is one MIA unit")

    @field_validator("k_percents")
    @classmethod
    def _check_k(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("k sweep must not be empty")
        for k in value:
            if not 0 < k <= 100:
                raise ValueError(f"k={k} is outside (0, 100]")
        return value


class BehavioralConstraint(BaseModel):
    """A type-I (Renyi closeness) or type-II (sup forbidden probability) constraint."""

    mode: Literal["type-I", "type-II"]
    prompts: List[List[int]] = Field(default_factory=list, description="Type-I prompt token sequences")
    alpha: float = Field(default=2.0, gt=0, description="Renyi order, never 1")
    forbidden: List[Tuple[List[int], int]] = Field(
        default_factory=list, description="Type-II (prefix tokens, forbidden token) pairs"
    )
    xi: float = Field(default=1e-2, ge=0, description="Slack of the constraint")

    @model_validator(mode="after")
    def _check_mode(self) -> "BehavioralConstraint":
        if self.mode == "type-I":
            if self.alpha == 1:
                raise ValueError("alpha = 1 is KL divergence; use kl_divergence instead")
            if not self.prompts:
                raise ValueError("type-I constraint needs a non-empty prompt set")
        else:
            if not self.forbidden:
                raise ValueError("type-II constraint needs a non-empty forbidden set")
            if not 0 < self.xi < 1:
                raise ValueError("type-II slack must lie in (0, 1)")
        return self


class BehavioralSettings(BaseModel):
    """How the experiment builds and evaluates behavioral constraints."""

    enabled: bool = Field(default=True, description="Compute type-I/type-II measures and the type-II run")
    alpha: float = Field(default=2.0, gt=0, description="Renyi order for the type-I measure")
    general_prompt_sample: int = Field(
        default=10, ge=0, description="Sequences from G added to the U prompts of the type-I measure"
    )
    num_forbidden_pairs: int = Field(default=5, ge=1, description="Forbidden pairs drawn from U")
    xi: float = Field(default=1e-2, gt=0, lt=1, description="Type-II slack")
    learning_rate: float = Field(default=1e-2, gt=0, description="Step size of the type-II ascent run")
    step_budget: int = Field(default=128, ge=0, description="Maximum updates of the type-II run")
    retain_data: Literal["in-distribution", "general"] = Field(
        default="general", description="Data of the KL-to-vanilla term of the type-II run (R or G)"
    )
    retain_coefficient: float = Field(default=1.0, ge=0, description="Weight of the KL-to-vanilla term; 0 disables it")
    ppl_slack: Optional[float] = Field(
        default=0.05,
        gt=0,
        description="A type-II update may raise the retain-data perplexity at most this fraction above vanilla",
    )

    @field_validator("alpha")
    @classmethod
    def _alpha_not_one(cls, value: float) -> float:
        if value == 1:
            raise ValueError("alpha = 1 is KL divergence; use kl_divergence instead")
        return value


class SweepSpec(BaseModel):
    """Hyperparameter sweep over learning rate or optimization steps."""

    axis: Literal["learning-rate", "optimization-steps"] = Field(default="learning-rate")
    grid: List[float] = Field(
        default_factory=lambda: [1e-3, 3e-3, 1e-2, 3e-2, 1e-1], description="Strictly increasing grid"
    )
    fixed: float = Field(default=4, description="Value of the other axis (steps for lr sweeps, lr for step sweeps)")
    methods: Optional[List[str]] = Field(default=None, description="Preset names; all configured methods when None")

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("sweep grid must not be empty")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        return value


class LrSearchSpec(BaseModel):
    """Two-phase learning-rate search settings."""

    enabled: bool = Field(default=False, description="Pick each method's lr by search before the run")
    coarse_grid: List[float] = Field(default_factory=lambda: [1e-3, 1e-2, 1e-1])
    fine_points: int = Field(default=10, ge=1)
    steps: int = Field(default=4, ge=1, description="Optimization steps fixed during the search")
    tolerance: float = Field(default=0.02, ge=0)


class ExperimentConfig(BaseModel):
    """Everything one experiment needs."""

    generator: GeneratorSpec = Field(default_factory=GeneratorSpec)
    splits: SplitSpec = Field(default_factory=SplitSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    methods: List[UnlearnRun] = Field(
        default_factory=lambda: [UnlearnRun(method=MethodSpec.preset(name)) for name in METHOD_PRESETS]
    )
    mia: MiaConfig = Field(default_factory=MiaConfig)
    behavioral: BehavioralSettings = Field(default_factory=BehavioralSettings)
    lr_search: LrSearchSpec = Field(default_factory=LrSearchSpec)
    sweep: Optional[SweepSpec] = Field(default=None)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], description="Experiment seeds")
    output_dir: str = Field(default="runs", description="Root of per-seed run directories")

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        return value

    @model_validator(mode="after")
    def _check_context(self) -> "ExperimentConfig":
        if self.model.arch == "tiny-decoder" and self.generator.sequence_length > self.model.context_length:
            raise ValueError(
                f"sequence length {self.generator.sequence_length} exceeds context length {self.model.context_length}"
            )
        return self

    @classmethod
    def from_yaml(cls, path: Union[str, Path], apply_env: bool = True) -> "ExperimentConfig":
        """Load a YAML config file; environment overrides apply on top."""
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        config = cls(**data)
        return config.with_env_overrides() if apply_env else config

    @classmethod
    def from_runnable_config(cls, config: RunnableConfig) -> "ExperimentConfig":
        """Recover the experiment config inside a graph node."""
        configurable = config.get("configurable", {}) if config else {}
        experiment = configurable.get("experiment")
        if isinstance(experiment, cls):
            return experiment
        return cls(**(experiment or {}))

    @classmethod
    def get_default_config(cls) -> "ExperimentConfig":
        return cls().with_env_overrides()

    def with_env_overrides(self) -> "ExperimentConfig":
        """Apply UNLEARNING_LAB_OUTPUT_DIR / UNLEARNING_LAB_SEEDS."""
        updates: Dict[str, Any] = {}
        if os.environ.get(OUTPUT_DIR_ENV):
            updates["output_dir"] = os.environ[OUTPUT_DIR_ENV]
        if os.environ.get(SEEDS_ENV):
            updates["seeds"] = [int(s) for s in os.environ[SEEDS_ENV].split(",") if s.strip()]
        if not updates:
            return self
        logger.info(f"[CONFIG] Environment overrides: {updates}")
        return self.model_validate({**self.model_dump(), **updates})

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump without the output directory."""
        return sha256_hex(self.model_dump(mode="json", exclude={"output_dir"}))
