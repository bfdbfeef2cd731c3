"""Tape-based reverse-mode automatic differentiation."""

from . import ops
from .jacobian import (
    contact_jacobian,
    contact_jacobian_norm,
    finite_diff_grad,
    jacobian,
    matrix_norm,
    spectral_norm,
)
from .ops import stop_gradient
from .tape import Tape, Var, backward, record, value_of

__all__ = [
    "Tape",
    "Var",
    "backward",
    "contact_jacobian",
    "contact_jacobian_norm",
    "finite_diff_grad",
    "jacobian",
    "matrix_norm",
    "ops",
    "record",
    "spectral_norm",
    "stop_gradient",
    "value_of",
]
