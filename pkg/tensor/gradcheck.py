"""Central finite-difference gradient checks."""

from typing import Callable, Dict, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numerical_gradient(
    loss_fn: Callable[[], Tensor],
    param: Tensor,
    h: float = 1e-5,
) -> np.ndarray:
    """
    Central-difference gradient of a scalar ``loss_fn`` w.r.t. ``param``.

    ``param.data`` is perturbed in place and restored after every evaluation.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = loss_fn().item()
            flat[i] = original - h
            minus = loss_fn().item()
            flat[i] = original
            grad_flat[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(|a|, |n|, 1) over all entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
) -> Dict[int, float]:
    """
    Compare backprop gradients with finite differences for every tensor in ``params``.

    Args:
        loss_fn: Builds a fresh scalar loss from the current parameter values
        params: Leaves with requires_grad=True
        h: Finite-difference step

    Returns:
        Mapping from parameter position to its max relative error
    """
    for p in params:
        p.zero_grad()
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    return {
        i: relative_error(analytic[i], numerical_gradient(loss_fn, p, h))
        for i, p in enumerate(params)
    }


def directional_error(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    rng: np.random.Generator,
    h: float = 1e-8,
) -> float:
    """
    Relative error of the backprop derivative along one random direction.

    Every tensor in ``params`` moves together along a uniform [-1, 1]
    direction, so a whole network costs three loss evaluations. The small
    default step keeps both evaluations clear of leaky ReLU kinks.
    """
    for p in params:
        p.zero_grad()
    loss_fn().backward()
    directions = [rng.uniform(-1.0, 1.0, size=p.shape) for p in params]
    analytic = sum(float(np.sum(p.grad * v)) for p, v in zip(params, directions) if p.grad is not None)

    originals = [p.data.copy() for p in params]
    with no_grad():
        for p, v, x in zip(params, directions, originals):
            p.data[...] = x + h * v
        plus = loss_fn().item()
        for p, v, x in zip(params, directions, originals):
            p.data[...] = x - h * v
        minus = loss_fn().item()
        for p, x in zip(params, originals):
            p.data[...] = x
    numeric = (plus - minus) / (2.0 * h)
    return relative_error(np.array([analytic]), np.array([numeric]))


def projected(out: Tensor, seed: int = 0) -> Tensor:
    """Reduce a tensor to a scalar with fixed random weights, so every entry's gradient is exercised."""
    weights = np.random.default_rng(seed).uniform(-1.0, 1.0, size=out.shape)
    return (out * Tensor(weights)).sum()
