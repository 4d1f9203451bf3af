"""
FLOPs cost model for retraining and unlearning.
Training costs 6 * tokens * P, a forward pass 2 * tokens * P; all arithmetic is exact integer.
"""

from decimal import Decimal
from fractions import Fraction
from numbers import Integral, Real
from typing import List, Union

import pandas as pd

from ..config import METHOD_PRESETS, MethodSpec
from ..errors import UnknownMethodError

Count = Union[int, float, Decimal, str]

METHOD_KINDS = ("first-order", "adversarial", "hybrid")


def as_count(value: Count, what: str = "count") -> int:
    """Exact non-negative integer from an int, an integral float (e.g. 3e12) or a decimal string."""
    if isinstance(value, bool):
        raise ValueError(f"{what} must be a number, got {value!r}")
    if isinstance(value, Integral):
        exact = Fraction(int(value))
    elif isinstance(value, (Decimal, Real)):
        exact = Fraction(value)
    else:
        exact = Fraction(Decimal(str(value)))
    if exact.denominator != 1:
        raise ValueError(f"{what} must be integral, got {value!r}")
    if exact < 0:
        raise ValueError(f"{what} must be non-negative, got {value!r}")
    return int(exact)


def training_flops(tokens: Count, params: Count) -> int:
    return 6 * as_count(tokens, "tokens") * as_count(params, "parameter count")


def forward_flops(tokens: Count, params: Count) -> int:
    return 2 * as_count(tokens, "tokens") * as_count(params, "parameter count")


def method_kind(method: Union[str, MethodSpec]) -> str:
    if isinstance(method, MethodSpec):
        return method.cost_kind
    if method in METHOD_KINDS:
        return method
    return MethodSpec.preset(method).cost_kind


def method_flops(method: Union[str, MethodSpec], forget_tokens: Count, params: Count, epochs: Count = 1) -> int:
    """Unlearning cost of a method; hybrids spend an equal token budget on the retain term."""
    try:
        kind = method_kind(method)
    except UnknownMethodError:
        raise UnknownMethodError(str(method), list(METHOD_PRESETS) + list(METHOD_KINDS)) from None
    tokens = as_count(forget_tokens, "forget tokens") * as_count(epochs, "epochs")
    if kind == "first-order":
        return training_flops(tokens, params)
    if kind == "adversarial":
        return training_flops(tokens, params) + forward_flops(tokens, params)
    return 2 * training_flops(tokens, params)


def format_flops(value: int, significant: int = 3) -> str:
    """Scientific notation with `significant` figures, e.g. 1.08e23."""
    if value == 0:
        return "0"
    mantissa, exponent = format(Decimal(value), f".{significant - 1}e").split("e")
    return f"{mantissa}e{int(exponent)}"


def efficiency_ratio(params: Count, training_tokens: Count, forget_tokens: Count, epochs: Count = 1) -> float:
    """Retraining FLOPs over gradient-ascent FLOPs."""
    ga = method_flops("gradient-ascent", forget_tokens, params, epochs)
    return float(Fraction(training_flops(training_tokens, params), ga)) if ga else float("inf")


def cost_table(params: Count, training_tokens: Count, forget_tokens: Count, epochs: Count = 1) -> pd.DataFrame:
    """Retraining plus every preset method, with exact integers and 3-figure renderings."""
    rows: List[dict] = []
    retrain = training_flops(training_tokens, params)
    rows.append({"method": "retraining", "kind": "retraining", "flops": retrain, "flops_text": format_flops(retrain)})
    for name in METHOD_PRESETS:
        flops = method_flops(name, forget_tokens, params, epochs)
        rows.append({"method": name, "kind": method_kind(name), "flops": flops, "flops_text": format_flops(flops)})
    # flops exceed int64, so keep Python integers
    return pd.DataFrame(rows, columns=["method", "kind", "flops", "flops_text"], dtype=object)
