"""Differentiable primitives used by the generator, discriminator and losses.

Convolutions are computed through strided window views and ``np.tensordot``;
the scatter back into the input (col2im) loops over kernel offsets in a fixed
order so results do not depend on the BLAS thread count beyond the matmul.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from utils.exceptions import ConfigError, DimensionError, NumericError
from .tensor import Tensor

INSTANCE_NORM_EPS = 1e-5


def _check_rank(op: str, x: Tensor, rank: int) -> None:
    if x.ndim != rank:
        raise DimensionError(op, "rank", expected=rank, actual=x.ndim)


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C, Ho, Wo, kh, kw) view of every kernel placement."""
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def _scatter_windows(cols: np.ndarray, out_hw: tuple, stride: int) -> np.ndarray:
    """Adjoint of ``_windows``: (B, C, Ho, Wo, kh, kw) summed into (B, C, H, W)."""
    batch, channels, ho, wo, kh, kw = cols.shape
    out = np.zeros((batch, channels) + tuple(out_hw))
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, :, :, i, j]
    return out


# *** convolutions ***

def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    2-D cross-correlation.

    Args:
        x: Input of shape (B, Cin, H, W)
        weight: Kernel of shape (Cout, Cin, kh, kw), kh/kw in {1, 3, 4}
        bias: Optional bias of shape (Cout,)
        stride: 1 or 2
        padding: Zero padding on every spatial border

    Returns:
        Tensor of shape (B, Cout, floor((H + 2p - kh) / stride) + 1, ...)
    """
    _check_rank("conv2d", x, 4)
    _check_rank("conv2d", weight, 4)
    batch, cin, height, width = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise DimensionError("conv2d", "channel", expected=wcin, actual=cin)
    if kh not in (1, 3, 4) or kw not in (1, 3, 4):
        raise DimensionError("conv2d", "kernel", expected="{1,3,4}", actual=(kh, kw))
    if stride not in (1, 2):
        raise ConfigError(f"conv2d: unsupported stride {stride}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError("conv2d", "bias", expected=(cout,), actual=bias.shape)
    if height + 2 * padding < kh or width + 2 * padding < kw:
        raise DimensionError("conv2d", "height/width", expected=f">= kernel {kh}x{kw}", actual=(height, width))

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _windows(padded, kh, kw, stride)
    out = np.tensordot(cols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    w = weight.data
    padded_hw = padded.shape[2:]

    def backward(grad):
        grad_w = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 2, 3]))
        grad_cols = np.tensordot(grad, w, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        grad_padded = _scatter_windows(grad_cols, padded_hw, stride)
        grad_x = grad_padded[:, :, padding:padding + height, padding:padding + width]
        grad_b = grad.sum(axis=(0, 2, 3)) if bias is not None else None
        return grad_x, grad_w, grad_b

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, backward, "conv2d")


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 2,
    padding: int = 1,
) -> Tensor:
    """
    Transposed convolution (adjoint of ``conv2d`` with the same kernel).

    With kernel 4, stride 2, padding 1 the output spatial size is exactly
    twice the input size.

    Args:
        x: Input of shape (B, Cin, H, W)
        weight: Kernel of shape (Cin, Cout, k, k)
        bias: Optional bias of shape (Cout,)
        stride: Upsampling factor
        padding: Border cropped from the full transposed output

    Returns:
        Tensor of shape (B, Cout, (H - 1) * stride - 2p + k, ...)
    """
    _check_rank("conv_transpose2d", x, 4)
    _check_rank("conv_transpose2d", weight, 4)
    batch, cin, height, width = x.shape
    wcin, cout, kh, kw = weight.shape
    if wcin != cin:
        raise DimensionError("conv_transpose2d", "channel", expected=wcin, actual=cin)
    if bias is not None and bias.shape != (cout,):
        raise DimensionError("conv_transpose2d", "bias", expected=(cout,), actual=bias.shape)

    full_h = (height - 1) * stride + kh
    full_w = (width - 1) * stride + kw
    out_h, out_w = full_h - 2 * padding, full_w - 2 * padding
    if out_h <= 0 or out_w <= 0:
        raise DimensionError("conv_transpose2d", "height/width", expected="> 0", actual=(out_h, out_w))

    cols = np.tensordot(x.data, weight.data, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
    full = _scatter_windows(cols, (full_h, full_w), stride)
    out = full[:, :, padding:padding + out_h, padding:padding + out_w]
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    xd, w = x.data, weight.data

    def backward(grad):
        grad_full = np.zeros((batch, cout, full_h, full_w))
        grad_full[:, :, padding:padding + out_h, padding:padding + out_w] = grad
        grad_cols = _windows(grad_full, kh, kw, stride)
        grad_x = np.tensordot(grad_cols, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        grad_w = np.tensordot(xd, grad_cols, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = grad.sum(axis=(0, 2, 3)) if bias is not None else None
        return grad_x, grad_w, grad_b

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, backward, "conv_transpose2d")


# *** normalization and activations ***

def instance_norm(x: Tensor, eps: float = INSTANCE_NORM_EPS) -> Tensor:
    """Normalize every (batch, channel) plane to zero mean and unit variance."""
    _check_rank("instance_norm", x, 4)
    count = x.shape[2] * x.shape[3]
    if count < 2:
        raise DimensionError("instance_norm", "height*width", expected=">= 2", actual=count)
    mean = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward(grad):
        grad_sum = grad.sum(axis=(2, 3), keepdims=True)
        dot = (grad * xhat).sum(axis=(2, 3), keepdims=True)
        return (inv_std / count * (count * grad - grad_sum - xhat * dot),)

    return Tensor.from_op(xhat, (x,), backward, "instance_norm")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    """x for x >= 0, slope * x otherwise; the subgradient at 0 is ``slope``."""
    if not 0.0 < slope < 1.0:
        raise ConfigError(f"leaky_relu: slope must lie in (0, 1), got {slope}")
    positive = x.data > 0
    out = np.where(x.data >= 0, x.data, slope * x.data)
    scale = np.where(positive, 1.0, slope)
    return Tensor.from_op(out, (x,), lambda g: (g * scale,), "leaky_relu")


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor.from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise NumericError("log: non-positive input")
    xd = x.data
    return Tensor.from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); the gradient is zero where the floor is active."""
    active = x.data > floor
    out = np.where(active, x.data, floor)
    return Tensor.from_op(out, (x,), lambda g: (g * active,), "clamp_min")


# *** pooling ***

def avg_pool_global(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, C) mean over the spatial axes."""
    _check_rank("avg_pool_global", x, 4)
    return x.mean(axis=(2, 3))


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2."""
    _check_rank("avg_pool2", x, 4)
    batch, channels, height, width = x.shape
    if height % 2 or width % 2:
        raise DimensionError("avg_pool2", "height/width", expected="even", actual=(height, width))
    out = x.data.reshape(batch, channels, height // 2, 2, width // 2, 2).mean(axis=(3, 5))

    def backward(grad):
        return (np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) * 0.25,)

    return Tensor.from_op(out, (x,), backward, "avg_pool2")


def box_mean(x: Tensor, window: int) -> Tensor:
    """
    Mean over every ``window`` x ``window`` neighbourhood (valid placements only).

    (B, C, H, W) -> (B, C, H - window + 1, W - window + 1).
    """
    _check_rank("box_mean", x, 4)
    height, width = x.shape[2:]
    if window > height or window > width:
        raise DimensionError("box_mean", "height/width", expected=f">= {window}", actual=(height, width))
    scale = 1.0 / (window * window)
    out = sliding_window_view(x.data, (window, window), axis=(2, 3)).sum(axis=(4, 5)) * scale

    def backward(grad):
        pad = window - 1
        padded = np.pad(grad, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        return (sliding_window_view(padded, (window, window), axis=(2, 3)).sum(axis=(4, 5)) * scale,)

    return Tensor.from_op(out, (x,), backward, "box_mean")


def pad_reflect(x: Tensor, pad: int) -> Tensor:
    """Reflect-pad the two spatial axes (edge sample not repeated)."""
    _check_rank("pad_reflect", x, 4)
    height, width = x.shape[2:]
    if pad >= height or pad >= width:
        raise DimensionError("pad_reflect", "height/width", expected=f"> {pad}", actual=(height, width))
    rows = np.pad(np.arange(height), pad, mode="reflect")
    cols = np.pad(np.arange(width), pad, mode="reflect")
    out = x.data[:, :, rows][:, :, :, cols]
    shape = x.shape

    def backward(grad):
        by_row = np.zeros(shape[:2] + (height, grad.shape[3]))
        np.add.at(by_row, (slice(None), slice(None), rows), grad)
        full = np.zeros(shape)
        np.add.at(full, (slice(None), slice(None), slice(None), cols), by_row)
        return (full,)

    return Tensor.from_op(out, (x,), backward, "pad_reflect")


# *** structural ops ***

def concat(inputs: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along ``axis``; gradients are routed back to each slice."""
    if not inputs:
        raise DimensionError("concat", "inputs", expected=">= 1 tensor", actual=0)
    ndim = inputs[0].ndim
    axis = axis % ndim
    for t in inputs[1:]:
        if t.ndim != ndim:
            raise DimensionError("concat", "rank", expected=ndim, actual=t.ndim)
        for ax in range(ndim):
            if ax != axis and t.shape[ax] != inputs[0].shape[ax]:
                raise DimensionError("concat", f"axis {ax}", expected=inputs[0].shape[ax], actual=t.shape[ax])
    sizes = [t.shape[axis] for t in inputs]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in inputs], axis=axis)

    def backward(grad):
        return tuple(
            np.take(grad, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(inputs))
        )

    return Tensor.from_op(out, tuple(inputs), backward, "concat")


def split(x: Tensor, sizes: Sequence[int], axis: int = 1) -> List[Tensor]:
    """Inverse of ``concat``: cut ``x`` into consecutive slices along ``axis``."""
    axis = axis % x.ndim
    if sum(sizes) != x.shape[axis]:
        raise DimensionError("split", f"axis {axis}", expected=x.shape[axis], actual=sum(sizes))
    pieces, start = [], 0
    for size in sizes:
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, start + size)
        pieces.append(x[tuple(index)])
        start += size
    return pieces


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """(B, F) @ weight(F', F).T + bias(F') -> (B, F')."""
    _check_rank("linear", x, 2)
    _check_rank("linear", weight, 2)
    if weight.shape[1] != x.shape[1]:
        raise DimensionError("linear", "feature", expected=weight.shape[1], actual=x.shape[1])
    xd, w = x.data, weight.data
    out = xd @ w.T
    if bias is not None:
        if bias.shape != (w.shape[0],):
            raise DimensionError("linear", "bias", expected=(w.shape[0],), actual=bias.shape)
        out = out + bias.data

    def backward(grad):
        return grad @ w, grad.T @ xd, (grad.sum(axis=0) if bias is not None else None)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, backward, "linear")


def dropout(
    x: Tensor,
    rate: float,
    training: bool,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Inverted dropout: survivors are scaled by 1 / (1 - rate); identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout: rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout: a random generator is required in training mode")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return Tensor.from_op(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# *** losses on raw tensors ***

def mean_abs(x: Tensor) -> Tensor:
    """Mean absolute value (L1); sign(0) = 0 in the gradient."""
    sign = np.sign(x.data)
    count = x.data.size
    return Tensor.from_op(
        np.asarray(np.abs(x.data).mean()), (x,), lambda g: (g * sign / count,), "mean_abs"
    )


def mean_sq(x: Tensor) -> Tensor:
    """Mean squared value (L2)."""
    xd = x.data
    count = xd.size
    return Tensor.from_op(np.asarray((xd * xd).mean()), (x,), lambda g: (g * 2.0 * xd / count,), "mean_sq")


def cross_entropy(logits: Tensor, targets: Union[int, Sequence[int]]) -> Tensor:
    """
    Softmax cross-entropy averaged over the batch.

    Args:
        logits: Tensor of shape (B, N)
        targets: One class index per row (an int is broadcast to every row)

    Returns:
        Scalar tensor: mean_b -log softmax(logits[b])[targets[b]]
    """
    _check_rank("cross_entropy", logits, 2)
    batch, classes = logits.shape
    targets = np.full(batch, targets, dtype=int) if np.isscalar(targets) else np.asarray(targets, dtype=int)
    if targets.shape != (batch,):
        raise DimensionError("cross_entropy", "batch", expected=batch, actual=targets.shape)
    if np.any(targets < 0) or np.any(targets >= classes):
        raise ConfigError(f"cross_entropy: class index out of range [0, {classes})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    loss = -log_probs[rows, targets].mean()

    def backward(grad):
        probs = np.exp(log_probs)
        probs[rows, targets] -= 1.0
        return (grad * probs / batch,)

    return Tensor.from_op(np.asarray(loss), (logits,), backward, "cross_entropy")


def peak_to_peak(x: Tensor, y: Optional[Tensor] = None) -> Tensor:
    """
    Per-sample range max - min over every non-batch element of ``x`` (and ``y``).

    Returns shape (B,). The gradient flows to the arg-max and arg-min elements.
    """
    batch = x.shape[0]
    flat = [x.reshape(batch, -1)] + ([y.reshape(batch, -1)] if y is not None else [])
    joint = concat(flat, axis=1) if len(flat) > 1 else flat[0]
    rows = np.arange(batch)
    hi, lo = joint.data.argmax(axis=1), joint.data.argmin(axis=1)
    spread = joint.data[rows, hi] - joint.data[rows, lo]
    shape = joint.shape

    def backward(grad):
        out = np.zeros(shape)
        out[rows, hi] += grad
        out[rows, lo] -= grad
        return (out,)

    return Tensor.from_op(spread, (joint,), backward, "peak_to_peak")
