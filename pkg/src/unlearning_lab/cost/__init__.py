from .flops import (
    METHOD_KINDS,
    as_count,
    cost_table,
    efficiency_ratio,
    format_flops,
    forward_flops,
    method_flops,
    method_kind,
    training_flops,
)

__all__ = [
    "METHOD_KINDS",
    "as_count",
    "cost_table",
    "efficiency_ratio",
    "format_flops",
    "forward_flops",
    "method_flops",
    "method_kind",
    "training_flops",
]
