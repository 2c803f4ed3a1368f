"""Minimal float64 tensor library with reverse-mode differentiation."""

from .tensor import Tensor, no_grad, is_grad_enabled, as_tensor
from . import functional
from .snapshot import save_tensors, load_tensors
from .gradcheck import check_gradients, directional_error, numerical_gradient, relative_error, projected

__all__ = [
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "as_tensor",
    "functional",
    "save_tensors",
    "load_tensors",
    "check_gradients",
    "directional_error",
    "numerical_gradient",
    "relative_error",
    "projected",
]
