from .graph import CompGraph, Node, NodeId
from .ops import OP_RULES, PROB_FLOOR, OpKind

__all__ = ["CompGraph", "Node", "NodeId", "OpKind", "OP_RULES", "PROB_FLOOR"]
