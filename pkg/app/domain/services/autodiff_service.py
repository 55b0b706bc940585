# domain/services/autodiff_service.py

import logging
from typing import Dict, List, Sequence

import torch

from domain.model.entities.autodiff import OpKind, TapeNode
from domain.model.entities.errors import ContractError, DimensionError, DomainError, NumericError

logger = logging.getLogger(__name__)

DTYPE = torch.float64


def as_matrix(values) -> torch.Tensor:
    """Converts nested sequences, vectors or tensors into a 2D float64 tensor."""
    tensor = torch.as_tensor(values, dtype=DTYPE)
    if tensor.dim() == 0:
        return tensor.reshape(1, 1)
    if tensor.dim() == 1:
        return tensor.reshape(1, -1)
    if tensor.dim() != 2:
        raise DimensionError(f"Expected a matrix, got a tensor with {tensor.dim()} dimensions")
    return tensor


def stable_sigmoid(x: torch.Tensor) -> torch.Tensor:
    """Sigmoid evaluated on the sign of x so neither branch overflows."""
    z = torch.exp(-torch.abs(x))
    return torch.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def stable_log_sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.clamp(x, max=0.0) - torch.log1p(torch.exp(-torch.abs(x)))


def _require_same_shape(kind: OpKind, a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{kind.value}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def _is_row_broadcast(a: torch.Tensor, b: torch.Tensor) -> bool:
    return b.shape[0] == 1 and a.shape[0] != 1 and b.shape[1] == a.shape[1]


def forward_op(kind: OpKind, inputs: Sequence[torch.Tensor], **attrs) -> torch.Tensor:
    """
    Evaluates one operation on 2D float64 tensors.

    Args:
        kind: Operation to evaluate
        inputs: Operands, 1 or 2 depending on the kind (CONCAT_COLS takes 2)
        attrs: slope for LEAKY_RELU, factor for SCALE, at/part for SPLIT_COLS

    Returns:
        torch.Tensor: The mathematical result

    Raises:
        DimensionError: Operand shapes are incompatible
        DomainError: LOG applied to a non-positive entry
    """
    for tensor in inputs:
        if tensor.dim() != 2:
            raise DimensionError(f"{kind.value}: operands must be matrices, got shape {tuple(tensor.shape)}")

    if kind == OpKind.MATMUL:
        a, b = inputs
        if a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: cannot multiply {tuple(a.shape)} by {tuple(b.shape)}")
        return a @ b
    if kind in (OpKind.ADD, OpKind.SUB):
        a, b = inputs
        if not _is_row_broadcast(a, b):
            _require_same_shape(kind, a, b)
        return a + b if kind == OpKind.ADD else a - b
    if kind == OpKind.HADAMARD:
        a, b = inputs
        _require_same_shape(kind, a, b)
        return a * b
    if kind == OpKind.CONCAT_COLS:
        a, b = inputs
        if a.shape[0] != b.shape[0]:
            raise DimensionError(f"concat_cols: row counts {a.shape[0]} and {b.shape[0]} differ")
        return torch.cat([a, b], dim=1)

    (x,) = inputs
    if kind == OpKind.SCALE:
        return x * float(attrs["factor"])
    if kind == OpKind.LEAKY_RELU:
        return torch.where(x > 0, x, x * float(attrs["slope"]))
    if kind == OpKind.TANH:
        return torch.tanh(x)
    if kind == OpKind.SIGMOID:
        return stable_sigmoid(x)
    if kind == OpKind.LOG_SIGMOID:
        return stable_log_sigmoid(x)
    if kind == OpKind.EXP:
        return torch.exp(x)
    if kind == OpKind.LOG:
        if bool((x <= 0).any()):
            raise DomainError("log: input has non-positive entries")
        return torch.log(x)
    if kind == OpKind.ABS:
        return torch.abs(x)
    if kind == OpKind.SUM_ALL:
        return x.sum().reshape(1, 1)
    if kind == OpKind.SUM_ROWS:
        return x.sum(dim=1, keepdim=True)
    if kind == OpKind.SPLIT_COLS:
        at = int(attrs["at"])
        if not 0 < at < x.shape[1]:
            raise DimensionError(f"split_cols: split point {at} outside (0, {x.shape[1]})")
        return x[:, :at].clone() if attrs["part"] == 0 else x[:, at:].clone()
    raise ContractError(f"Unsupported operation: {kind}")


def _input_grads(kind: OpKind, values: List[torch.Tensor], out: torch.Tensor,
                 g: torch.Tensor, attrs: Dict) -> List[torch.Tensor]:
    """Vector-Jacobian products of one node with respect to each of its inputs."""
    if kind == OpKind.MATMUL:
        a, b = values
        return [g @ b.T, a.T @ g]
    if kind in (OpKind.ADD, OpKind.SUB):
        a, b = values
        gb = g.sum(dim=0, keepdim=True) if _is_row_broadcast(a, b) else g
        return [g, gb if kind == OpKind.ADD else -gb]
    if kind == OpKind.HADAMARD:
        a, b = values
        return [g * b, g * a]
    if kind == OpKind.CONCAT_COLS:
        split = values[0].shape[1]
        return [g[:, :split], g[:, split:]]

    (x,) = values
    if kind == OpKind.SCALE:
        return [g * float(attrs["factor"])]
    if kind == OpKind.LEAKY_RELU:
        # derivative at exactly 0 takes the negative-side slope
        return [g * torch.where(x > 0, torch.ones_like(x), torch.full_like(x, float(attrs["slope"])))]
    if kind == OpKind.TANH:
        return [g * (1.0 - out * out)]
    if kind == OpKind.SIGMOID:
        return [g * out * (1.0 - out)]
    if kind == OpKind.LOG_SIGMOID:
        return [g * stable_sigmoid(-x)]
    if kind == OpKind.EXP:
        return [g * out]
    if kind == OpKind.LOG:
        return [g / x]
    if kind == OpKind.ABS:
        return [g * torch.sign(x)]
    if kind == OpKind.SUM_ALL:
        return [g.expand_as(x).clone()]
    if kind == OpKind.SUM_ROWS:
        return [g.expand_as(x).clone()]
    if kind == OpKind.SPLIT_COLS:
        at = int(attrs["at"])
        full = torch.zeros_like(x)
        if attrs["part"] == 0:
            full[:, :at] = g
        else:
            full[:, at:] = g
        return [full]
    raise ContractError(f"No gradient rule for {kind}")


class Tape:
    """
    Reverse-mode automatic differentiation tape over dense float64 matrices.

    Nodes are appended in creation order, which is a topological order of the
    graph, so backward is a single reverse sweep. A disabled tape evaluates the
    same operations without recording them.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.nodes: List[TapeNode] = []

    def _record(self, kind: OpKind, parents: Sequence[TapeNode], value: torch.Tensor,
                attrs: Dict, requires_grad: bool) -> TapeNode:
        if not self.enabled:
            return TapeNode(node_id=-1, kind=kind, parents=(), value=value,
                            attrs=attrs, requires_grad=requires_grad)
        node = TapeNode(
            node_id=len(self.nodes),
            kind=kind,
            parents=tuple(p.node_id for p in parents),
            value=value,
            attrs=attrs,
            requires_grad=requires_grad
        )
        self.nodes.append(node)
        return node

    def leaf(self, value, requires_grad: bool = True) -> TapeNode:
        """Registers an input or parameter matrix."""
        tensor = as_matrix(value)
        if not bool(torch.isfinite(tensor).all()):
            raise NumericError("Leaf values must be finite")
        return self._record(OpKind.LEAF, (), tensor, {}, requires_grad)

    def constant(self, value) -> TapeNode:
        return self.leaf(value, requires_grad=False)

    def apply(self, kind: OpKind, *inputs: TapeNode, **attrs) -> TapeNode:
        value = forward_op(kind, [node.value for node in inputs], **attrs)
        requires_grad = any(node.requires_grad for node in inputs)
        return self._record(kind, inputs, value, attrs, requires_grad)

    # Named helpers

    def matmul(self, a: TapeNode, b: TapeNode) -> TapeNode:
        return self.apply(OpKind.MATMUL, a, b)

    def add(self, a: TapeNode, b: TapeNode) -> TapeNode:
        return self.apply(OpKind.ADD, a, b)

    def sub(self, a: TapeNode, b: TapeNode) -> TapeNode:
        return self.apply(OpKind.SUB, a, b)

    def hadamard(self, a: TapeNode, b: TapeNode) -> TapeNode:
        return self.apply(OpKind.HADAMARD, a, b)

    def scale(self, a: TapeNode, factor: float) -> TapeNode:
        return self.apply(OpKind.SCALE, a, factor=factor)

    def leaky_relu(self, a: TapeNode, slope: float) -> TapeNode:
        return self.apply(OpKind.LEAKY_RELU, a, slope=slope)

    def tanh(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.TANH, a)

    def sigmoid(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.SIGMOID, a)

    def log_sigmoid(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.LOG_SIGMOID, a)

    def exp(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.EXP, a)

    def log(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.LOG, a)

    def abs(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.ABS, a)

    def sum_all(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.SUM_ALL, a)

    def sum_rows(self, a: TapeNode) -> TapeNode:
        return self.apply(OpKind.SUM_ROWS, a)

    def concat_cols(self, a: TapeNode, b: TapeNode) -> TapeNode:
        return self.apply(OpKind.CONCAT_COLS, a, b)

    def split_cols(self, a: TapeNode, at: int):
        """Returns the column blocks [0, at) and [at, cols) as two nodes."""
        return (self.apply(OpKind.SPLIT_COLS, a, at=at, part=0),
                self.apply(OpKind.SPLIT_COLS, a, at=at, part=1))

    def mean_all(self, a: TapeNode, count: int) -> TapeNode:
        return self.scale(self.sum_all(a), 1.0 / count)

    def backward(self, root: TapeNode) -> Dict[int, torch.Tensor]:
        """
        Propagates d(root)/d(node) to every recorded node.

        Args:
            root: 1 x 1 node recorded on this tape

        Returns:
            Dict mapping node id to its gradient, for every node that requires grad

        Raises:
            ContractError: root is not scalar or the tape is not recording
        """
        if not self.enabled or root.node_id < 0:
            raise ContractError("backward needs a node recorded on an enabled tape")
        if root.value.shape != (1, 1):
            raise ContractError(f"backward root must be 1x1, got {tuple(root.value.shape)}")

        for node in self.nodes:
            node.grad = torch.zeros_like(node.value)
        root.grad = torch.ones_like(root.value)

        for node in reversed(self.nodes[: root.node_id + 1]):
            if node.kind == OpKind.LEAF or not node.requires_grad:
                continue
            if not bool(node.grad.any()):
                continue
            parents = [self.nodes[pid] for pid in node.parents]
            grads = _input_grads(node.kind, [p.value for p in parents], node.value, node.grad, node.attrs)
            for parent, grad in zip(parents, grads):
                if parent.requires_grad:
                    parent.grad = parent.grad + grad

        logger.debug("Backward pass over %d nodes", root.node_id + 1)
        return {node.node_id: node.grad for node in self.nodes if node.requires_grad}
