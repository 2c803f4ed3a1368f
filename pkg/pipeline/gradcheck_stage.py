"""Finite-difference verification of every tensor primitive and training objective."""

import time
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from models.config import DiscriminatorConfig, GeneratorConfig
from models.domain import TargetMask
from models.records import GradCheckResult
from networks import (
    CycleBundle,
    DiscriminatorNet,
    GeneratorNet,
    clsf_loss_fake,
    clsf_loss_real,
    gan_loss_dsc,
    gan_loss_gen,
    impute,
    mcc_loss,
    mcc_ssim_loss,
    ssim_loss,
)
from networks.discriminator import DOWNSAMPLE_FACTOR
from tensor import Tensor, check_gradients, directional_error, projected
from tensor import functional as F
from utils.exceptions import ConfigError
from .base_stage import BaseStage

DEFAULT_TOLERANCE = 1e-5
COMPOSITE_FACTOR = 10.0
SIDE = 8

# A case draws fresh leaves from the rng and returns (scalar loss builder, leaves).
Case = Callable[[np.random.Generator, int], Tuple[Callable[[], Tensor], List[Tensor]]]


def _leaf(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _unary(op: Callable[[Tensor], Tensor], low: float = -1.0, high: float = 1.0) -> Case:
    def case(rng, seed):
        x = _leaf(rng, 2, 2, SIDE, SIDE, low=low, high=high)
        return (lambda: projected(op(x), seed)), [x]
    return case


def _conv(kernel: int, stride: int, padding: int) -> Case:
    def case(rng, seed):
        x, w, b = _leaf(rng, 1, 2, SIDE, SIDE), _leaf(rng, 3, 2, kernel, kernel), _leaf(rng, 3)
        return (lambda: projected(F.conv2d(x, w, b, stride=stride, padding=padding), seed)), [x, w, b]
    return case


def _conv_transpose(rng, seed):
    x, w, b = _leaf(rng, 1, 2, SIDE // 2, SIDE // 2), _leaf(rng, 2, 3, 4, 4), _leaf(rng, 3)
    return (lambda: projected(F.conv_transpose2d(x, w, b), seed)), [x, w, b]


def _linear(rng, seed):
    x, w, b = _leaf(rng, 3, 5), _leaf(rng, 4, 5), _leaf(rng, 4)
    return (lambda: projected(F.linear(x, w, b), seed)), [x, w, b]


def _concat_split(rng, seed):
    a, b = _leaf(rng, 1, 2, SIDE, SIDE), _leaf(rng, 1, 3, SIDE, SIDE)

    def loss():
        left, right = F.split(F.concat([a, b], axis=1), [1, 4], axis=1)
        return projected(left, seed) + projected(right, seed + 1)
    return loss, [a, b]


def _arithmetic(rng, seed):
    x, y = _leaf(rng, 2, 3), _leaf(rng, 2, 3, low=0.5, high=1.5)

    def loss():
        out = (x * y - x / y + (y ** 3) * 0.5 - 2.0) * x[:, 1:].sum(axis=1, keepdims=True)
        return projected(out.reshape(3, 2), seed) + out.mean()
    return loss, [x, y]


def _cross_entropy(rng, seed):
    logits = _leaf(rng, 3, 4, low=-2.0, high=2.0)
    targets = rng.integers(0, 4, size=3)
    return (lambda: F.cross_entropy(logits, targets)), [logits]


def _peak_to_peak(rng, seed):
    x, y = _leaf(rng, 2, 1, SIDE, SIDE), _leaf(rng, 2, 1, SIDE, SIDE)
    return (lambda: projected(F.peak_to_peak(x, y), seed)), [x, y]


def _images(rng: np.random.Generator, count: int) -> List[Tensor]:
    return [_leaf(rng, 1, 1, SIDE, SIDE, low=0.0, high=1.0) for _ in range(count)]


def _bundle_case(loss_fn: Callable[[CycleBundle], Tensor]) -> Case:
    def case(rng, seed):
        n_domains, target = 3, int(rng.integers(0, 3))
        others = [k for k in range(n_domains) if k != target]
        originals = dict(zip(others, _images(rng, 2)))
        recons = dict(zip(others, _images(rng, 2)))
        fake = Tensor(rng.uniform(size=(1, 1, SIDE, SIDE)))
        bundle = CycleBundle(target=target, n_domains=n_domains, fake=fake,
                             reconstructions=recons, originals=originals)
        return (lambda: loss_fn(bundle)), list(originals.values()) + list(recons.values())
    return case


def _ssim(rng, seed):
    x, y = _images(rng, 2)
    return (lambda: ssim_loss(x, y)), [x, y]


def _gan_dsc(rng, seed):
    real, fake = _leaf(rng, 2, 1, 2, 2), _leaf(rng, 2, 1, 2, 2)
    return (lambda: gan_loss_dsc(real, fake)), [real, fake]


def _gan_gen(rng, seed):
    fake = _leaf(rng, 2, 1, 2, 2)
    return (lambda: gan_loss_gen(fake)), [fake]


def _clsf(loss_fn: Callable[[Tensor, int], Tensor]) -> Case:
    def case(rng, seed):
        logits = _leaf(rng, 2, 4, low=-2.0, high=2.0)
        domain = int(rng.integers(0, 4))
        return (lambda: loss_fn(logits, domain)), [logits]
    return case


def _dropout(rng, seed):
    x = _leaf(rng, 2, 2, SIDE, SIDE)
    # same mask on every evaluation
    return (lambda: projected(F.dropout(x, 0.5, True, np.random.default_rng(seed)), seed)), [x]


def _generator_forward(rng, seed):
    net = GeneratorNet(GeneratorConfig(n_domains=3, base_channels=1, levels=2), rng=rng)
    target = int(rng.integers(0, 3))
    images = dict(zip((k for k in range(3) if k != target), _images(rng, 2)))
    mask = TargetMask(domain=target, n_domains=3, batch_size=1, height=SIDE, width=SIDE)
    return (lambda: projected(impute(net, images, mask), seed)), list(images.values()) + net.parameters()


def _discriminator_forward(rng, seed):
    net = DiscriminatorNet(DiscriminatorConfig(n_domains=3, base_channels=1), rng=rng)
    image = _leaf(rng, 1, 1, DOWNSAMPLE_FACTOR, DOWNSAMPLE_FACTOR, low=0.0, high=1.0)
    domain = int(rng.integers(0, 3))

    def loss():
        patch_map, logits = net(image, training=True, rng=np.random.default_rng(seed))
        return projected(patch_map, seed) + clsf_loss_real(logits, domain)
    return loss, [image] + net.parameters()


PRIMITIVES: Dict[str, Case] = {
    "arithmetic": _arithmetic,
    "conv2d_k3": _conv(3, 1, 1),
    "conv2d_k4_s2": _conv(4, 2, 1),
    "conv2d_k1": _conv(1, 1, 0),
    "conv_transpose2d": _conv_transpose,
    "instance_norm": _unary(F.instance_norm),
    "leaky_relu": _unary(F.leaky_relu),
    "sigmoid": _unary(F.sigmoid, -3.0, 3.0),
    "log": _unary(F.log, 0.5, 2.0),
    "clamp_min": _unary(lambda x: F.clamp_min(x, 0.0)),
    "avg_pool_global": _unary(F.avg_pool_global),
    "avg_pool2": _unary(F.avg_pool2),
    "box_mean": _unary(lambda x: F.box_mean(x, 3)),
    "pad_reflect": _unary(lambda x: F.pad_reflect(x, 3)),
    "concat_split": _concat_split,
    "linear": _linear,
    "mean_abs": _unary(F.mean_abs),
    "mean_sq": _unary(F.mean_sq),
    "cross_entropy": _cross_entropy,
    "peak_to_peak": _peak_to_peak,
    "dropout": _dropout,
}

COMPOSITES: Dict[str, Case] = {
    "ssim": _ssim,
    "mcc": _bundle_case(mcc_loss),
    "mcc_ssim": _bundle_case(mcc_ssim_loss),
    "gan_dsc": _gan_dsc,
    "gan_gen": _gan_gen,
    "clsf_real": _clsf(clsf_loss_real),
    "clsf_fake": _clsf(clsf_loss_fake),
}

# Whole forward passes, checked along one random direction over inputs and parameters.
NETWORKS: Dict[str, Case] = {
    "generator": _generator_forward,
    "discriminator": _discriminator_forward,
}


def run_case(
    name: str, case: Case, seed: int, seeds: int, tolerance: float, directional: bool = False
) -> GradCheckResult:
    """Worst relative error of one case over ``seeds`` consecutive seeds starting at ``seed``."""
    worst = 0.0
    for s in range(seed, seed + seeds):
        rng = np.random.default_rng(s)
        loss_fn, leaves = case(rng, s)
        if directional:
            error = directional_error(loss_fn, leaves, rng)
        else:
            error = max(check_gradients(loss_fn, leaves).values())
        worst = max(worst, error)
    return GradCheckResult(name=name, max_relative_error=worst, tolerance=tolerance, seeds=seeds)


def run_gradcheck(
    seed: int = 0,
    seeds: int = 100,
    tolerance: float = DEFAULT_TOLERANCE,
    names: Sequence[str] = (),
) -> List[GradCheckResult]:
    """
    Check primitives at ``tolerance``; composite losses and network forward passes at ten times that.

    Args:
        names: Restrict the run to these case names (all when empty)
    """
    if tolerance <= 0:
        raise ConfigError(f"gradcheck: tolerance must be > 0, got {tolerance}")
    if seeds < 1:
        raise ConfigError(f"gradcheck: seeds must be >= 1, got {seeds}")
    unknown = set(names) - set(PRIMITIVES) - set(COMPOSITES) - set(NETWORKS)
    if unknown:
        raise ConfigError(f"gradcheck: unknown cases {sorted(unknown)}")

    composite_tolerance = tolerance * COMPOSITE_FACTOR
    tables = (
        (PRIMITIVES, tolerance, False),
        (COMPOSITES, composite_tolerance, False),
        (NETWORKS, composite_tolerance, True),
    )
    results = []
    for table, tol, directional in tables:
        for name, case in table.items():
            if names and name not in names:
                continue
            results.append(run_case(name, case, seed, seeds, tol, directional))
    return results


class GradCheckStage(BaseStage):
    """Self-verification of the autodiff core."""

    def __init__(self, **kwargs):
        super().__init__(stage_name="GradCheckStage", **kwargs)

    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Args:
            input_data: Dictionary containing optional seed, seeds, tolerance and names

        Returns:
            Dictionary with per-case results; status is "failed" if any case exceeds its tolerance
        """
        start_time = time.time()
        self.logger.info("Starting gradient checks...")

        try:
            results = run_gradcheck(
                seed=int(input_data.get("seed", 0)),
                seeds=int(input_data.get("seeds", 100)),
                tolerance=float(input_data.get("tolerance", DEFAULT_TOLERANCE)),
                names=input_data.get("names", ()),
            )
            for result in results:
                mark = "PASS" if result.passed else "FAIL"
                self.logger.info(
                    f"{mark} {result.name:<18} max rel err {result.max_relative_error:.2e} (tol {result.tolerance:.0e})"
                )
            failed = [r.name for r in results if not r.passed]
            output_data = {
                "status": "success" if not failed else "failed",
                "stage": self.stage_name,
                "results": results,
                "failed": failed,
            }
        except Exception as e:
            output_data = self.error_output(e)

        duration = time.time() - start_time
        self.log_execution(input_data, output_data, duration)

        return output_data
