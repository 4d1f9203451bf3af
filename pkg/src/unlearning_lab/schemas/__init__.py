from .report_schemas import (
    BehavioralSummary,
    FailureRecord,
    MetricsReport,
    MiaSummary,
    Provenance,
    RetrainTargetSummary,
    RunManifest,
    SplitMetrics,
    TraceStep,
    UnlearnSummary,
)

__all__ = [
    "BehavioralSummary",
    "FailureRecord",
    "MetricsReport",
    "MiaSummary",
    "Provenance",
    "RetrainTargetSummary",
    "RunManifest",
    "SplitMetrics",
    "TraceStep",
    "UnlearnSummary",
]
