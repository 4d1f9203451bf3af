"""
Model parameter snapshots.
A ModelParams value is never mutated in place; every update produces a new snapshot.
"""

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional

import numpy as np

from ..errors import TrainingDivergedError


class Arch(str, Enum):
    TINY_DECODER = "tiny-decoder"
    BIGRAM = "bigram"


class Role(str, Enum):
    VANILLA = "vanilla"
    UNLEARNED = "unlearned"
    RETRAINED = "retrained"


@dataclass(frozen=True)
class ModelParams:
    """Weights of a tiny decoder or a softmax bigram plus the metadata to rebuild its graph."""

    arch: Arch
    vocab_size: int
    arrays: Dict[str, np.ndarray]
    role: Role = Role.VANILLA
    layers: int = 0
    dim: int = 0
    heads: int = 0
    context_length: int = 0
    activation: str = "gelu"
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for name, value in self.arrays.items():
            arr = np.array(value, dtype=np.float64)
            arr.flags.writeable = False
            frozen[name] = arr
        object.__setattr__(self, "arrays", frozen)

    @property
    def param_count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def with_arrays(self, arrays: Dict[str, np.ndarray], role: Optional[Role] = None) -> "ModelParams":
        if set(arrays) != set(self.arrays):
            raise ValueError("updated arrays must keep the parameter names")
        for name, arr in arrays.items():
            if arr.shape != self.arrays[name].shape:
                raise ValueError(f"parameter {name} changed shape {self.arrays[name].shape} -> {arr.shape}")
        return replace(self, arrays={k: arrays[k] for k in self.arrays}, role=role or self.role)

    def with_role(self, role: Role) -> "ModelParams":
        return replace(self, role=role)

    def check_finite(self, step: int, stage: str) -> None:
        for name, arr in self.arrays.items():
            if not np.all(np.isfinite(arr)):
                bad = arr[~np.isfinite(arr)].flat[0]
                raise TrainingDivergedError(step, f"{stage} ({name})", float(bad))

    def fingerprint(self) -> str:
        """SHA-256 over architecture, dimensions and raw array bytes."""
        digest = hashlib.sha256()
        header = f"{self.arch.value}|{self.vocab_size}|{self.layers}|{self.dim}|{self.heads}|{self.context_length}"
        digest.update(header.encode("utf-8"))
        for name in sorted(self.arrays):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.arrays[name]).tobytes())
        return digest.hexdigest()

    def max_abs_diff(self, other: "ModelParams") -> float:
        return float(max(np.max(np.abs(self.arrays[k] - other.arrays[k])) for k in self.arrays))
