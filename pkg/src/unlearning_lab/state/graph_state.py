"""
State definitions for the experiment pipeline.
These TypedDict classes define the state that flows through the LangGraph.
"""

import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, List, Optional, Tuple, TypedDict

from ..config import BehavioralConstraint, ExperimentConfig, UnlearnRun
from ..corpus import CorpusSplits
from ..eval import RetrainTarget
from ..lm import CharVocab, ModelParams
from ..schemas import FailureRecord, MetricsReport, RunManifest, UnlearnSummary

NamedModel = Tuple[str, ModelParams]


@dataclass(frozen=True)
class SeedContext:
    """Corpus, splits and settings shared by every stage of one seed."""

    cfg: ExperimentConfig
    seed: int
    config_hash: str
    run_dir: Path
    vocab: CharVocab
    text_splits: CorpusSplits[str]
    splits: CorpusSplits[List[int]]
    prompts: List[List[int]]
    forbidden: Optional[BehavioralConstraint] = None


class ExperimentState(TypedDict, total=False):
    """Main state of one seed's run."""

    seed: int
    context: SeedContext
    vanilla: ModelParams
    retrained: ModelParams
    target: RetrainTarget
    vanilla_fingerprint: str
    vanilla_checkpoint_hash: str
    stages: Annotated[List[str], operator.add]
    reports: Annotated[List[MetricsReport], operator.add]
    models: Annotated[List[NamedModel], operator.add]
    failures: Annotated[List[FailureRecord], operator.add]
    manifest: RunManifest


class MethodState(TypedDict, total=False):
    """State of one unlearning method branch."""

    context: SeedContext
    vanilla: ModelParams
    retrained: Optional[ModelParams]
    target: RetrainTarget
    run: UnlearnRun
    unlearned: ModelParams
    summary: UnlearnSummary
    learning_rate: float
    stages: Annotated[List[str], operator.add]
    reports: Annotated[List[MetricsReport], operator.add]
    models: Annotated[List[NamedModel], operator.add]
    failures: Annotated[List[FailureRecord], operator.add]


class MethodOutputState(TypedDict):
    """What a method branch hands back to the seed's run."""

    stages: Annotated[List[str], operator.add]
    reports: Annotated[List[MetricsReport], operator.add]
    models: Annotated[List[NamedModel], operator.add]
    failures: Annotated[List[FailureRecord], operator.add]
