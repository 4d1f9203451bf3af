"""
Canonical JSON, content hashes and derived seeds.
"""

import hashlib
import json
import math
from typing import Any

import numpy as np


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no inf/nan literals that survive every parser
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def canonical_json(payload: Any) -> str:
    """Sorted-key, whitespace-free JSON used for every content hash."""
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(payload: Any) -> str:
    if isinstance(payload, bytes):
        return hashlib.sha256(payload).hexdigest()
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from any mix of ints and labels."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
