"""Multi-resolution discriminator with a PatchGAN source head and a domain classifier head."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from models.config import DiscriminatorConfig
from tensor import Tensor
from tensor import functional as F
from utils.exceptions import ConfigError, DimensionError
from .layers import Conv2d, Linear, Module

# Two halvings align the branches at H/4, then three stride-2 trunk stages.
DOWNSAMPLE_FACTOR = 32


class DiscriminatorNet(Module):
    """
    Three feature branches at different scales, a shared trunk, two heads.

    branch1: 3x3 conv at full resolution, then two 2x2 average pools
    branch2: two 2x2 average pools (quarter resolution), then 3x3 conv
    branch3: two stride-2 4x4 convs (sequential halving)

    The branches are concatenated at H/4 x W/4 and pass through three
    stride-2 conv stages. Dropout is applied to the trunk output before both heads.
    """

    def __init__(self, config: DiscriminatorConfig, rng: Optional[np.random.Generator] = None, seed: int = 0):
        super().__init__()
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(seed)
        base, slope = config.base_channels, config.slope

        self.branch1 = self.add_module("branch1", Conv2d(rng, 1, base, kernel=3, padding=1, slope=slope))
        self.branch2 = self.add_module("branch2", Conv2d(rng, 1, base, kernel=3, padding=1, slope=slope))
        self.branch3a = self.add_module("branch3a", Conv2d(rng, 1, base, kernel=4, stride=2, padding=1, slope=slope))
        self.branch3b = self.add_module("branch3b", Conv2d(rng, base, base, kernel=4, stride=2, padding=1, slope=slope))

        widths = [3 * base, 2 * base, 4 * base, 8 * base]
        self.trunk = [
            self.add_module(f"trunk{i}", Conv2d(rng, widths[i], widths[i + 1], kernel=4, stride=2, padding=1, slope=slope))
            for i in range(3)
        ]
        self.source_head = self.add_module("source_head", Conv2d(rng, widths[-1], 1, kernel=3, padding=1, slope=slope))
        self.class_head = self.add_module("class_head", Linear(rng, widths[-1], config.n_domains, slope=slope))

    @property
    def n_domains(self) -> int:
        return self.config.n_domains

    def features(self, image: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Shared trunk features (B, 8 * base, H/32, W/32), after dropout."""
        slope = self.config.slope
        b1 = F.avg_pool2(F.avg_pool2(F.leaky_relu(self.branch1(image), slope)))
        b2 = F.leaky_relu(self.branch2(quarter_resolution(image)), slope)
        b3 = F.leaky_relu(self.branch3b(F.leaky_relu(self.branch3a(image), slope)), slope)
        x = F.concat([b1, b2, b3], axis=1)
        for stage in self.trunk:
            x = F.leaky_relu(stage(x), slope)
        return F.dropout(x, self.config.dropout, training, rng)

    def __call__(
        self,
        image: Tensor,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Tensor, Tensor]:
        if image.ndim != 4 or image.shape[1] != 1:
            raise DimensionError("discriminate", "channel", expected=1, actual=image.shape)
        height, width = image.shape[2:]
        if height % DOWNSAMPLE_FACTOR or width % DOWNSAMPLE_FACTOR:
            raise DimensionError(
                "discriminate", "height/width", expected=f"divisible by {DOWNSAMPLE_FACTOR}", actual=(height, width)
            )
        shared = self.features(image, training, rng)
        patch_map = self.source_head(shared)
        class_logits = self.class_head(F.avg_pool_global(shared))
        return patch_map, class_logits


def quarter_resolution(image: Tensor) -> Tensor:
    """Input of branch2: two successive 2x2 average pools."""
    return F.avg_pool2(F.avg_pool2(image))


def discriminate(
    net: DiscriminatorNet,
    image: Tensor,
    training: bool,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Score an image batch.

    Args:
        net: Discriminator
        image: Tensor (B, 1, H, W), H and W divisible by 32
        training: Enables dropout (requires ``rng``)
        rng: Random generator for the dropout masks

    Returns:
        (patch_map (B, 1, H/32, W/32), class_logits (B, N))
    """
    return net(image, training=training, rng=rng)


def patchgan_target(shape: Sequence[int], value: int) -> Tensor:
    """Constant LSGAN regression target: 1 for real, 0 for fake."""
    if value not in (0, 1):
        raise ConfigError(f"patchgan_target: value must be 0 or 1, got {value}")
    return Tensor.full(shape, float(value))
