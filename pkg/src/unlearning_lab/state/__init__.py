from .graph_state import ExperimentState, MethodOutputState, MethodState, NamedModel, SeedContext

__all__ = ["ExperimentState", "MethodOutputState", "MethodState", "NamedModel", "SeedContext"]
