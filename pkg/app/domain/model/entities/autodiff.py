# domain/model/entities/autodiff.py

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import torch


class OpKind(Enum):
    """
    Operations understood by the reverse-mode tape.

    All operands are 2D float64 tensors. ADD and SUB accept a 1 x cols row
    vector as second operand; no other broadcasting exists.
    """
    LEAF = "leaf"
    MATMUL = "matmul"
    ADD = "add"
    SUB = "sub"
    HADAMARD = "hadamard"
    SCALE = "scale"
    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    LOG_SIGMOID = "log_sigmoid"
    EXP = "exp"
    LOG = "log"
    ABS = "abs"
    SUM_ALL = "sum_all"
    SUM_ROWS = "sum_rows"
    CONCAT_COLS = "concat_cols"
    SPLIT_COLS = "split_cols"


@dataclass
class TapeNode:
    """
    One recorded value in the computation graph.

    Attributes:
        node_id: Position on the tape, -1 for values computed without taping
        kind: Operation that produced the value
        parents: Ids of the input nodes (always smaller than node_id)
        value: Cached forward value
        grad: Gradient accumulator with the shape of value
        attrs: Operation attributes (slope, factor, split point, ...)
        requires_grad: Whether gradients are tracked for this node
    """
    node_id: int
    kind: OpKind
    parents: Tuple[int, ...]
    value: torch.Tensor
    grad: Optional[torch.Tensor] = None
    attrs: Dict[str, Any] = field(default_factory=dict)
    requires_grad: bool = True

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.value.shape)

    def item(self) -> float:
        """Returns the value of a 1 x 1 node as a Python float."""
        return float(self.value.reshape(-1)[0])
