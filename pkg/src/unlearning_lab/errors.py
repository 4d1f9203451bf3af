"""
Exception types for the unlearning lab.
Every error raised on purpose by the package derives from UnlearningLabError.
"""

from typing import Dict, Optional, Sequence, Tuple


class UnlearningLabError(Exception):
    """Base class for all errors raised by the lab."""


class GraphShapeError(UnlearningLabError):
    """An op received inputs whose shapes it cannot combine."""

    def __init__(self, node_id: int, op: str, shapes: Sequence[Tuple[int, ...]], detail: str = ""):
        self.node_id = node_id
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        message = f"node {node_id} ({op}): incompatible input shapes {list(self.shapes)}"
        if detail:
            message += f" - {detail}"
        super().__init__(message)


class NonScalarRootError(UnlearningLabError):
    """backward() was asked to differentiate a non-scalar node."""

    def __init__(self, node_id: int, shape: Tuple[int, ...]):
        self.node_id = node_id
        self.shape = tuple(shape)
        super().__init__(f"backward root {node_id} must be scalar, got shape {self.shape}")


class UnboundInputError(UnlearningLabError):
    """forward() found an input node without a value."""

    def __init__(self, node_id: int, name: Optional[str] = None):
        self.node_id = node_id
        label = f" '{name}'" if name else ""
        super().__init__(f"input node {node_id}{label} has no bound value")


class ModelInputError(UnlearningLabError):
    """A prefix or sequence cannot be fed to the model (empty, too long, out of vocabulary)."""


class TrainingDivergedError(UnlearningLabError):
    """A loss or gradient became non-finite during an update."""

    def __init__(self, step: int, stage: str, value: float):
        self.step = step
        self.stage = stage
        self.value = value
        super().__init__(f"{stage} diverged at step {step}: non-finite value {value!r}")


class CheckpointFormatError(UnlearningLabError):
    """A checkpoint file is missing its header or was written by an unknown format version."""


class CorpusSpecError(UnlearningLabError):
    """A generator config is not usable (e.g. non-stochastic transition matrix)."""


class SplitError(UnlearningLabError):
    """Requested split sizes cannot be realised on the given corpus."""


class MethodSpecError(UnlearningLabError):
    """A method config combines fields in an unsupported way."""


class UnknownMethodError(UnlearningLabError):
    """A method name is neither a preset nor a known cost-model kind."""

    def __init__(self, name: str, known: Sequence[str]):
        self.name = name
        self.known = list(known)
        super().__init__(f"unknown method '{name}'; known methods: {', '.join(self.known)}")


class BracketingError(UnlearningLabError):
    """The coarse learning-rate grid does not bracket the perplexity target."""

    def __init__(self, target: float, endpoint_ppls: Dict[float, float]):
        self.target = target
        self.endpoint_ppls = dict(endpoint_ppls)
        listed = ", ".join(f"lr={lr:g}: ppl={ppl:.4g}" for lr, ppl in self.endpoint_ppls.items())
        super().__init__(f"target ppl {target:.4g} is not bracketed by the coarse grid ({listed})")


class SingularHessianBlockError(UnlearningLabError):
    """A per-context Hessian block could not be solved despite damping."""

    def __init__(self, context_token: int, damping: float):
        self.context_token = context_token
        self.damping = damping
        super().__init__(
            f"Hessian block for context token {context_token} is singular (damping={damping:g})"
        )
