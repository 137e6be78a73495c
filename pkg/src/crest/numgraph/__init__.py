"""Minimal reverse-mode autodiff over numpy float64 arrays."""

from crest.numgraph.adam import Adam, AdamState, adam_step
from crest.numgraph.gradcheck import GradCheckReport, check_gradients
from crest.numgraph.special import trigamma
from crest.numgraph.tensor import (
    Tensor,
    as_tensor,
    concat,
    digamma,
    lgamma,
    l2_normalize,
    log_softmax,
    matmul,
    softmax_rows,
    stack,
    tensor,
    where,
)

__all__ = [
    "Adam", "AdamState", "adam_step", "GradCheckReport", "check_gradients",
    "Tensor", "as_tensor", "concat", "digamma", "lgamma", "l2_normalize",
    "log_softmax", "matmul", "softmax_rows", "stack", "tensor", "trigamma", "where",
]
