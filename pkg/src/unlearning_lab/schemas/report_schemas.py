"""
Report schemas for the Unlearning Lab.
These Pydantic models define the JSON written for every evaluated model.
"""

import math
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class SplitMetrics(BaseModel):
    """Perplexity and next-token accuracy on one split."""

    perplexity: float = Field(description="exp(mean per-token NLL); at least 1")
    accuracy: float = Field(description="Fraction of argmax hits, in [0, 1]")
    tokens: int = Field(default=0, ge=0, description="Predicted positions in the split")

    @field_validator("perplexity")
    @classmethod
    def _check_ppl(cls, value: float) -> float:
        if math.isnan(value) or value < 1.0:
            raise ValueError(f"perplexity must be >= 1, got {value}")
        return value

    @field_validator("accuracy")
    @classmethod
    def _check_acc(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {value}")
        return value


class MiaSummary(BaseModel):
    """Min-K% Prob AUC for every k of the sweep."""

    auc_per_k: Dict[str, float] = Field(description="AUC keyed by k percent")
    best_k: float = Field(description="k with the highest AUC (smallest on ties)")
    best_auc: float = Field(description="Highest AUC of the sweep")

    @field_validator("best_auc")
    @classmethod
    def _check_best(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"AUC must lie in [0, 1], got {value}")
        return value

    @field_validator("auc_per_k")
    @classmethod
    def _check_table(cls, value: Dict[str, float]) -> Dict[str, float]:
        for k, auc in value.items():
            if not 0.0 <= auc <= 1.0:
                raise ValueError(f"AUC at k={k} must lie in [0, 1], got {auc}")
        return value


class BehavioralSummary(BaseModel):
    """Type-I distance to the retrained model and type-II forbidden-pair probability."""

    type1: Optional[float] = Field(default=None, ge=0, description="Max two-sided Renyi divergence to the retrained model")
    type1_alpha: Optional[float] = Field(default=None)
    type2: Optional[float] = Field(default=None, ge=0, le=1, description="Sup of forbidden-pair probabilities")
    type2_xi: Optional[float] = Field(default=None)
    type2_satisfied: Optional[bool] = Field(default=None)


class RetrainTargetSummary(BaseModel):
    ppl: float
    acc: float


class TraceStep(BaseModel):
    """One unlearning update."""

    step: int
    forget_ppl: float = Field(gt=0)
    retain_ppl: float = Field(gt=0, description="Perplexity on the retain sample R")
    grad_norm: float
    clipped: bool = False
    objective: float = 0.0


class UnlearnSummary(BaseModel):
    """Trace and flags of an unlearning run."""

    steps_taken: int = 0
    stop_reason: str = ""
    target: Optional[float] = None
    target_reached: Optional[bool] = None
    clip_events: int = 0
    forget_tokens: int = 0
    diverged: bool = False
    instability_events: int = 0
    backtracks: int = Field(default=0, description="Updates re-solved at a smaller lr to land inside the target band")
    rejected_steps: int = Field(default=0, description="Updates discarded by the retain-perplexity guard")
    trace: List[TraceStep] = Field(default_factory=list)


class Provenance(BaseModel):
    model_role: str
    method: Optional[str] = None
    config_hash: str
    seed: int
    learning_rate: Optional[float] = None
    steps: Optional[int] = None
    param_count: int = 0
    fingerprint: str = ""


class MetricsReport(BaseModel):
    """Everything measured for one model of one seed."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    provenance: Provenance
    splits: Dict[str, SplitMetrics] = Field(description="forget, retain, general and approximate splits")
    mia: Optional[MiaSummary] = None
    behavioral: Optional[BehavioralSummary] = None
    approx_target: Optional[RetrainTargetSummary] = None
    unlearning: Optional[UnlearnSummary] = None
    flops: Optional[int] = Field(default=None, ge=0, description="Estimated unlearning FLOPs")
    flops_text: Optional[str] = None


class FailureRecord(BaseModel):
    stage: str
    status: str = "error"
    error: str
    seed: Optional[int] = None
    method: Optional[str] = None


class RunManifest(BaseModel):
    """Per-seed run manifest; timestamps are the only non-deterministic fields."""

    config_hash: str
    seed: int
    started_at: str
    finished_at: Optional[str] = None
    stages: List[str] = Field(default_factory=list)
    failures: List[FailureRecord] = Field(default_factory=list)
    report_hashes: Dict[str, str] = Field(default_factory=dict)
    vanilla_fingerprint_before: Optional[str] = None
    vanilla_fingerprint_after: Optional[str] = None
    invariants_ok: bool = True
