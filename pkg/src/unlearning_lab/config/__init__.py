from .lab_config import (
    METHOD_PRESETS,
    BehavioralConstraint,
    BehavioralSettings,
    ExperimentConfig,
    GeneratorSpec,
    LrSearchSpec,
    MethodSpec,
    MiaConfig,
    ModelSpec,
    SplitSpec,
    SweepSpec,
    TrainConfig,
    UnlearnRun,
)

__all__ = [
    "METHOD_PRESETS",
    "BehavioralConstraint",
    "BehavioralSettings",
    "ExperimentConfig",
    "GeneratorSpec",
    "LrSearchSpec",
    "MethodSpec",
    "MiaConfig",
    "ModelSpec",
    "SplitSpec",
    "SweepSpec",
    "TrainConfig",
    "UnlearnRun",
]
