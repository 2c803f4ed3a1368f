"""Collaborative generator: multi-branch encoder, CCNL units, CCAM-attended decoder."""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from models.config import GeneratorConfig
from models.domain import TargetMask
from tensor import Tensor
from tensor import functional as F
from utils.exceptions import ConfigError, DimensionError
from .layers import CCAMUnit, CCNLUnit, Conv2d, ConvTranspose2d, Module
from .losses import CycleBundle

DomainImages = Union[Mapping[int, Tensor], Sequence[Tuple[int, Tensor]]]

PLACEHOLDER_ZEROS = "zeros"


class EncoderBranch(Module):
    """One encoder branch; every input domain has its own weights."""

    def __init__(self, rng: np.random.Generator, config: GeneratorConfig):
        super().__init__()
        self.levels = config.levels
        in_channels = 1 + config.n_domains
        for level in range(config.levels):
            width = config.channels_at(level)
            if level > 0:
                self.add_module(f"down{level}", Conv2d(rng, in_channels, in_channels, kernel=4, stride=2, padding=1, slope=config.slope))
            self.add_module(f"ccnl{level}", CCNLUnit(rng, in_channels, width, width, config.slope))
            in_channels = 2 * width

    def __call__(self, x: Tensor) -> List[Tensor]:
        features = []
        for level in range(self.levels):
            if level > 0:
                x = self._modules[f"down{level}"](x)
            x = self._modules[f"ccnl{level}"](x)
            features.append(x)
        return features


class GeneratorNet(Module):
    """
    U-net style generator with one encoder branch per domain.

    Encoder level l of every branch is concatenated across branches and
    joined to decoder level l through the skip connection. The decoder applies
    a CCAM after each CCNL unit, conditioned on the target mask vector.
    """

    def __init__(self, config: GeneratorConfig, rng: Optional[np.random.Generator] = None, seed: int = 0):
        super().__init__()
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(seed)
        n, levels, slope = config.n_domains, config.levels, config.slope

        self.branches = [self.add_module(f"encoder{k}", EncoderBranch(rng, config)) for k in range(n)]

        bottom = config.channels_at(levels - 1)
        self.add_module(f"dec_ccnl{levels - 1}", CCNLUnit(rng, n * 2 * bottom, bottom, bottom, slope))
        self.add_module(f"dec_ccam{levels - 1}", CCAMUnit(rng, 2 * bottom, n, max(2 * bottom // config.ccam_reduction, 4), slope))
        for level in range(levels - 2, -1, -1):
            width = config.channels_at(level)
            self.add_module(f"up{level}", ConvTranspose2d(rng, 2 * config.channels_at(level + 1), width, slope))
            self.add_module(f"dec_ccnl{level}", CCNLUnit(rng, width + n * 2 * width, width, width, slope))
            self.add_module(f"dec_ccam{level}", CCAMUnit(rng, 2 * width, n, max(2 * width // config.ccam_reduction, 4), slope))
        self.add_module("head", Conv2d(rng, 2 * config.channels_at(0), 1, kernel=1, slope=slope))

    @property
    def n_domains(self) -> int:
        return self.config.n_domains

    def check_spatial(self, height: int, width: int) -> None:
        factor = 2 ** (self.config.levels - 1)
        if height % factor or width % factor:
            raise DimensionError("impute", "height/width", expected=f"divisible by {factor}", actual=(height, width))

    def __call__(self, branch_inputs: Sequence[Tensor], mask: TargetMask) -> Tensor:
        """
        Args:
            branch_inputs: N tensors (B, 1 + N, H, W), index k routed to branch k
            mask: Target-domain mask

        Returns:
            Tensor (B, 1, H, W)
        """
        if len(branch_inputs) != self.n_domains:
            raise DimensionError("generator", "branches", expected=self.n_domains, actual=len(branch_inputs))
        per_branch = [branch(x) for branch, x in zip(self.branches, branch_inputs)]
        skips = [F.concat([feats[level] for feats in per_branch], axis=1) for level in range(self.config.levels)]

        top = self.config.levels - 1
        x = self._modules[f"dec_ccnl{top}"](skips[top])
        x = self._modules[f"dec_ccam{top}"](x, mask)
        for level in range(top - 1, -1, -1):
            x = self._modules[f"up{level}"](x)
            x = self._modules[f"dec_ccnl{level}"](F.concat([x, skips[level]], axis=1))
            x = self._modules[f"dec_ccam{level}"](x, mask)
        return self._modules["head"](x)


def _as_domain_dict(inputs: DomainImages) -> Dict[int, Tensor]:
    pairs = list(inputs.items()) if isinstance(inputs, Mapping) else list(inputs)
    routed: Dict[int, Tensor] = {}
    for domain, image in pairs:
        domain = int(domain)
        if domain in routed:
            raise ConfigError(f"impute: domain {domain} supplied more than once")
        routed[domain] = image
    return routed


def impute(
    net: GeneratorNet,
    inputs: DomainImages,
    target: TargetMask,
    missing_placeholder: str = PLACEHOLDER_ZEROS,
) -> Tensor:
    """
    Synthesize the target-domain image from the complementary set.

    Args:
        net: Generator
        inputs: N - 1 images (B, 1, H, W) keyed by source domain
        target: Target-domain mask (its batch/spatial size must match the images)
        missing_placeholder: What fills the target branch; only "zeros" is supported

    Returns:
        Imputed image (B, 1, H, W)
    """
    if missing_placeholder != PLACEHOLDER_ZEROS:
        raise ConfigError(f"impute: unknown placeholder policy '{missing_placeholder}'")
    n = net.n_domains
    routed = _as_domain_dict(inputs)
    if target.n_domains != n:
        raise ConfigError(f"impute: mask encodes {target.n_domains} domains, generator has {n}")
    if target.domain in routed:
        raise ConfigError(f"impute: target domain {target.domain} is among the inputs")
    if len(routed) != n - 1 or any(not 0 <= d < n for d in routed):
        raise ConfigError(f"impute: expected the {n - 1} non-target domains, got {sorted(routed)}")

    shapes = {tuple(image.shape) for image in routed.values()}
    if len(shapes) != 1:
        raise DimensionError("impute", "image", expected="identical shapes", actual=sorted(shapes))
    batch, channels, height, width = shapes.pop()
    if channels != 1:
        raise DimensionError("impute", "channel", expected=1, actual=channels)
    if (target.batch_size, target.height, target.width) != (batch, height, width):
        raise DimensionError("impute", "mask", expected=(batch, height, width),
                             actual=(target.batch_size, target.height, target.width))
    net.check_spatial(height, width)

    spatial = target.spatial_form
    placeholder = Tensor.zeros((batch, 1, height, width))
    branch_inputs = [
        F.concat([routed.get(k, placeholder), spatial], axis=1) for k in range(n)
    ]
    return net(branch_inputs, target)


def backward_cycle(
    net: GeneratorNet,
    fake: Tensor,
    reals: Mapping[int, Tensor],
    fake_domain: int,
    reconstruct_domain: int,
) -> Tensor:
    """
    Re-impute an original domain from a set that contains the forward fake.

    Args:
        fake: Forward imputation of ``fake_domain``
        reals: Originals of every domain except ``fake_domain`` and ``reconstruct_domain``

    Returns:
        Reconstruction of ``reconstruct_domain``
    """
    if reconstruct_domain == fake_domain:
        raise ConfigError("backward_cycle: reconstruct domain must differ from the fake's domain")
    if fake_domain in reals or reconstruct_domain in reals:
        raise ConfigError("backward_cycle: reals must exclude the fake and reconstructed domains")
    inputs = dict(reals)
    inputs[fake_domain] = fake
    mask = TargetMask.like(reconstruct_domain, net.n_domains, fake)
    return impute(net, inputs, mask)


def run_cycles(net: GeneratorNet, reals: Mapping[int, Tensor], target: int) -> CycleBundle:
    """
    Forward imputation of ``target``, its N - 1 backward cycles and the self-reconstruction.

    The self-reconstruction re-imputes ``target`` from the backward reconstructions.
    """
    n = net.n_domains
    if sorted(reals) != list(range(n)):
        raise ConfigError(f"run_cycles: need all {n} domains, got {sorted(reals)}")
    complement = {k: v for k, v in reals.items() if k != target}
    fake = impute(net, complement, TargetMask.like(target, n, reals[target]))

    reconstructions = {}
    for other in complement:
        others = {k: v for k, v in complement.items() if k != other}
        reconstructions[other] = backward_cycle(net, fake, others, target, other)

    self_reconstruction = impute(net, reconstructions, TargetMask.like(target, n, fake))
    return CycleBundle(
        target=target,
        n_domains=n,
        fake=fake,
        reconstructions=reconstructions,
        originals=dict(reals),
        self_reconstruction=self_reconstruction,
    )
