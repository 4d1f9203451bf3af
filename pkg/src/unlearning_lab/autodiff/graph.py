"""
Define-by-run computation graph with reverse-mode differentiation.
Nodes live in an append-only list, so a node's inputs always have smaller ids.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import GraphShapeError, NonScalarRootError, UnboundInputError
from .ops import OpKind, rule_for

logger = logging.getLogger(__name__)

NodeId = int


@dataclass
class Node:
    """One recorded operation; value and grad are filled by forward/backward."""

    op: OpKind
    inputs: Tuple[NodeId, ...]
    attrs: Dict[str, Any] = field(default_factory=dict)
    name: Optional[str] = None
    value: Optional[np.ndarray] = None
    grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> Optional[Tuple[int, ...]]:
        return None if self.value is None else tuple(self.value.shape)


class CompGraph:
    """Append-only graph of dense float64 array operations.

    Ops are recorded first and evaluated by forward(); input values can be
    rebound and the graph re-run, which is how finite-difference checks work.
    """

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    # ------------------------------------------------------------------
    # Recording
    # ------------------------------------------------------------------

    def _record(self, op: OpKind, inputs: Sequence[NodeId], **attrs) -> NodeId:
        for node_id in inputs:
            if not 0 <= node_id < len(self.nodes):
                raise ValueError(f"{op.value}: unknown input node {node_id}")
        self.nodes.append(Node(op=op, inputs=tuple(inputs), attrs=attrs))
        return len(self.nodes) - 1

    def input(self, value: Optional[np.ndarray] = None, name: Optional[str] = None) -> NodeId:
        """Declare an input node, optionally binding its value right away."""
        self.nodes.append(Node(op=OpKind.INPUT, inputs=(), name=name))
        node_id = len(self.nodes) - 1
        if value is not None:
            self.bind(node_id, value)
        return node_id

    def bind(self, node_id: NodeId, value) -> None:
        node = self.nodes[node_id]
        if node.op != OpKind.INPUT:
            raise ValueError(f"node {node_id} is {node.op.value}, only input nodes can be bound")
        node.value = np.array(value, dtype=np.float64)

    def add(self, a: NodeId, b: NodeId) -> NodeId:
        return self._record(OpKind.ADD, (a, b))

    def mul(self, a: NodeId, b: NodeId) -> NodeId:
        return self._record(OpKind.MUL, (a, b))

    def matmul(self, a: NodeId, b: NodeId) -> NodeId:
        return self._record(OpKind.MATMUL, (a, b))

    def embedding(self, table: NodeId, ids) -> NodeId:
        return self._record(OpKind.EMBEDDING, (table,), ids=np.asarray(ids, dtype=np.int64))

    def relu(self, x: NodeId) -> NodeId:
        return self._record(OpKind.RELU, (x,))

    def gelu(self, x: NodeId) -> NodeId:
        return self._record(OpKind.GELU, (x,))

    def layer_norm(self, x: NodeId, eps: float = 1e-5) -> NodeId:
        return self._record(OpKind.LAYER_NORM, (x,), eps=float(eps))

    def softmax(self, x: NodeId) -> NodeId:
        return self._record(OpKind.SOFTMAX, (x,))

    def log(self, x: NodeId) -> NodeId:
        return self._record(OpKind.LOG, (x,))

    def negate(self, x: NodeId) -> NodeId:
        return self._record(OpKind.NEGATE, (x,))

    def sum(self, x: NodeId) -> NodeId:
        return self._record(OpKind.SUM, (x,))

    def mean(self, x: NodeId) -> NodeId:
        return self._record(OpKind.MEAN, (x,))

    def scale(self, x: NodeId, c: float) -> NodeId:
        return self._record(OpKind.SCALE, (x,), c=float(c))

    def cross_entropy(self, probs: NodeId, target) -> NodeId:
        """Per-row -sum(target * log(probs)); target is a constant distribution array."""
        return self._record(OpKind.CROSS_ENTROPY, (probs,), target=np.asarray(target, dtype=np.float64))

    def transpose(self, x: NodeId, axes: Sequence[int]) -> NodeId:
        return self._record(OpKind.TRANSPOSE, (x,), axes=tuple(int(a) for a in axes))

    def reshape(self, x: NodeId, shape: Sequence[int]) -> NodeId:
        return self._record(OpKind.RESHAPE, (x,), shape=tuple(int(s) for s in shape))

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def value(self, node_id: NodeId) -> np.ndarray:
        value = self.nodes[node_id].value
        if value is None:
            raise ValueError(f"node {node_id} has not been evaluated")
        return value

    def grad(self, node_id: NodeId) -> np.ndarray:
        grad = self.nodes[node_id].grad
        if grad is None:
            raise ValueError(f"node {node_id} has no gradient buffer; run forward first")
        return grad

    def forward(self) -> List[np.ndarray]:
        """Evaluate every node in id order and return all values.

        Every node also gets a zero gradient buffer shaped like its value.
        """
        for node_id, node in enumerate(self.nodes):
            if node.op == OpKind.INPUT:
                if node.value is None:
                    raise UnboundInputError(node_id, node.name)
                continue
            rule = rule_for(node.op)
            xs = [self.nodes[i].value for i in node.inputs]
            shapes = [tuple(x.shape) for x in xs]
            detail = rule.check(shapes, node.attrs)
            if detail:
                raise GraphShapeError(node_id, node.op.value, shapes, detail)
            node.value = np.asarray(rule.forward(xs, node.attrs), dtype=np.float64)
        for node in self.nodes:
            node.grad = np.zeros(np.shape(node.value))
        return [node.value for node in self.nodes]

    def ancestors(self, root: NodeId) -> np.ndarray:
        """Boolean mask of nodes with a path to root (root included)."""
        reach = np.zeros(len(self.nodes), dtype=bool)
        reach[root] = True
        for node_id in range(root, -1, -1):
            if reach[node_id]:
                for i in self.nodes[node_id].inputs:
                    reach[i] = True
        return reach

    def backward(self, root: NodeId) -> Dict[NodeId, np.ndarray]:
        """Accumulate d(root)/d(node) into every node's grad buffer.

        Returns the gradients of the input nodes. Nodes off every path to root
        keep an all-zero gradient.
        """
        root_value = self.value(root)
        if root_value.size != 1 or root_value.ndim != 0:
            raise NonScalarRootError(root, tuple(root_value.shape))

        for node in self.nodes:
            node.grad = np.zeros(np.shape(self.value_or_empty(node)))
        reach = self.ancestors(root)
        self.nodes[root].grad = np.ones_like(root_value)

        for node_id in range(root, -1, -1):
            node = self.nodes[node_id]
            if not reach[node_id] or node.op == OpKind.INPUT:
                continue
            rule = rule_for(node.op)
            xs = [self.nodes[i].value for i in node.inputs]
            input_grads = rule.backward(node.grad, xs, node.value, node.attrs)
            for i, g in zip(node.inputs, input_grads):
                self.nodes[i].grad += g

        return {i: n.grad for i, n in enumerate(self.nodes) if n.op == OpKind.INPUT}

    @staticmethod
    def value_or_empty(node: Node) -> np.ndarray:
        if node.value is None:
            raise ValueError("forward must run before backward")
        return node.value
