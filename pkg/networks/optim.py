"""Adaptive-moment (Adam) optimizer over a module's named parameters."""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Mapping

import numpy as np

from models.config import OptimizerConfig
from utils.exceptions import DataError
from .layers import Module

STEP_KEY = "__step__"


class Adam:
    """
    Adam with bias-corrected moments.

    Moments are kept per parameter name and mirror the parameter shapes.
    ``step`` only touches parameters of the module it was built for.
    """

    def __init__(self, module: Module, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.module = module
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = OrderedDict()
        self.v: Dict[str, np.ndarray] = OrderedDict()
        for name, param in module.named_parameters():
            self.m[name] = np.zeros_like(param.data)
            self.v[name] = np.zeros_like(param.data)

    @classmethod
    def for_generator(cls, module: Module, config: OptimizerConfig) -> "Adam":
        return cls(module, config.lr_generator, config.beta1, config.beta2, config.eps)

    @classmethod
    def for_discriminator(cls, module: Module, config: OptimizerConfig) -> "Adam":
        return cls(module, config.lr_discriminator, config.beta1, config.beta2, config.eps)

    def zero_grad(self) -> None:
        self.module.zero_grad()

    def step(self) -> None:
        """Apply one update from the accumulated gradients; parameters without a gradient are skipped."""
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, param in self.module.named_parameters():
            if param.grad is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * param.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * param.grad * param.grad
            param.data -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        state[STEP_KEY] = np.array([float(self.step_count)])
        for name in self.m:
            state[f"m.{name}"] = self.m[name].copy()
            state[f"v.{name}"] = self.v[name].copy()
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        if STEP_KEY not in state:
            raise DataError("optimizer state has no step counter")
        for name in self.m:
            for prefix, store in (("m", self.m), ("v", self.v)):
                key = f"{prefix}.{name}"
                if key not in state or state[key].shape != store[name].shape:
                    raise DataError(f"optimizer state mismatch for {key}")
                store[name][...] = state[key]
        self.step_count = int(state[STEP_KEY][0])
