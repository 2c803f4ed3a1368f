"""Parameter containers and the building blocks shared by both networks."""

from __future__ import annotations

import contextlib
from collections import OrderedDict
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from models.domain import TargetMask
from tensor import Tensor
from tensor import functional as F
from utils.exceptions import DataError, DimensionError


class Module:
    """Tree of named parameters with train/eval mode."""

    def __init__(self):
        self._parameters: "OrderedDict[str, Tensor]" = OrderedDict()
        self._modules: "OrderedDict[str, Module]" = OrderedDict()
        self.training = True

    def add_parameter(self, name: str, value: np.ndarray) -> Tensor:
        param = Tensor(value, requires_grad=True, name=name)
        self._parameters[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, param in self._parameters.items():
            yield prefix + name, param
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix + name + ".")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        """Copy arrays into the parameters; names and shapes must match exactly."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise DataError(f"checkpoint mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, param in own.items():
            if state[name].shape != param.shape:
                raise DataError(f"checkpoint mismatch for {name}: {state[name].shape} vs {param.shape}")
            param.data[...] = state[name]


def _he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, slope: float) -> np.ndarray:
    gain = np.sqrt(2.0 / (1.0 + slope ** 2))
    return rng.normal(0.0, gain / np.sqrt(fan_in), size=shape)


class Conv2d(Module):
    def __init__(
        self,
        rng,
        cin: int,
        cout: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
        slope: float = 0.2,
        bias: bool = True,
    ):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.weight = self.add_parameter("weight", _he_normal(rng, (cout, cin, kernel, kernel), cin * kernel * kernel, slope))
        self.bias = self.add_parameter("bias", np.zeros(cout)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose2d(Module):
    """Kernel 4, stride 2, padding 1: exact 2x upsampling."""

    def __init__(self, rng, cin: int, cout: int, slope: float = 0.2):
        super().__init__()
        self.weight = self.add_parameter("weight", _he_normal(rng, (cin, cout, 4, 4), cin * 4, slope))
        self.bias = self.add_parameter("bias", np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.weight, self.bias, stride=2, padding=1)


class Linear(Module):
    def __init__(self, rng, fin: int, fout: int, slope: float = 0.2):
        super().__init__()
        self.weight = self.add_parameter("weight", _he_normal(rng, (fout, fin), fin, slope))
        self.bias = self.add_parameter("bias", np.zeros(fout))

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class CCNLUnit(Module):
    """
    Parallel 1x1 and 3x3 convolutions, concatenated, instance-normalized and
    passed through a leaky ReLU. Emits c1 + c3 channels at the input resolution.
    The convolutions carry no bias: instance normalization would cancel it.
    """

    def __init__(self, rng, cin: int, c1: int, c3: int, slope: float = 0.2):
        super().__init__()
        self.cin, self.c1, self.c3, self.slope = cin, c1, c3, slope
        self.conv1 = self.add_module("conv1", Conv2d(rng, cin, c1, kernel=1, slope=slope, bias=False))
        self.conv3 = self.add_module("conv3", Conv2d(rng, cin, c3, kernel=3, padding=1, slope=slope, bias=False))

    @property
    def out_channels(self) -> int:
        return self.c1 + self.c3

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.cin:
            raise DimensionError("ccnl_forward", "channel", expected=self.cin, actual=x.shape[1] if x.ndim == 4 else x.shape)
        merged = F.concat([self.conv1(x), self.conv3(x)], axis=1)
        return F.leaky_relu(F.instance_norm(merged), self.slope)


class CCAMUnit(Module):
    """
    Conditional channel attention: X * sigmoid(MLP([avg_pool(X), m])).

    The MLP is two linear layers with a leaky ReLU between them.
    """

    def __init__(self, rng, channels: int, n_domains: int, hidden: Optional[int] = None, slope: float = 0.2):
        super().__init__()
        self.channels, self.n_domains, self.slope = channels, n_domains, slope
        hidden = hidden or max(channels // 4, 4)
        self.fc1 = self.add_module("fc1", Linear(rng, channels + n_domains, hidden, slope=slope))
        self.fc2 = self.add_module("fc2", Linear(rng, hidden, channels, slope=slope))

    def attention(self, features: Tensor, mask: TargetMask) -> Tensor:
        """Per-channel scaling weights in (0, 1), shape (B, C)."""
        if features.ndim != 4 or features.shape[1] != self.channels:
            raise DimensionError("ccam_forward", "channel", expected=self.channels, actual=features.shape)
        vector = mask.vector_form
        if vector.shape != (features.shape[0], self.n_domains):
            raise DimensionError("ccam_forward", "mask", expected=(features.shape[0], self.n_domains), actual=vector.shape)
        pooled = F.avg_pool_global(features)
        hidden = F.leaky_relu(self.fc1(F.concat([pooled, vector], axis=1)), self.slope)
        return F.sigmoid(self.fc2(hidden))

    def __call__(self, features: Tensor, mask: TargetMask) -> Tensor:
        weights = self.attention(features, mask)
        return features * weights.reshape(features.shape[0], self.channels, 1, 1)


def ccnl_forward(unit: CCNLUnit, x: Tensor) -> Tensor:
    return unit(x)


def ccam_forward(unit: CCAMUnit, features: Tensor, mask: TargetMask) -> Tensor:
    return unit(features, mask)


def parameter_norms(module: Module) -> Dict[str, float]:
    return {name: float(np.linalg.norm(p.data)) for name, p in module.named_parameters()}


@contextlib.contextmanager
def frozen(module: Module) -> Iterator[None]:
    """Stop gradients from reaching ``module``'s parameters inside the block."""
    params = module.parameters()
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, flag in zip(params, flags):
            p.requires_grad = flag
