"""Threshold segmenter used as the downstream task of the essentiality study."""

from typing import Dict, Sequence

import numpy as np
from pydantic import BaseModel, Field

from utils.exceptions import ConfigError
from .phantom import EXCLUSIVE_DOMAIN, FLUID_SUPPRESSED_DOMAIN


class ThresholdSegmenter(BaseModel):
    """
    Fixed-ratio thresholds relative to the median intensity inside the support.

    ``enhancing`` reads only the exclusive-information domain, ``whole`` reads
    only the fluid-suppressed domain. Ratios make the rule invariant to the
    per-image intensity normalization.
    """
    enhancing_domain: str = Field(default=EXCLUSIVE_DOMAIN)
    enhancing_ratio: float = Field(default=2.3, gt=1)
    whole_domain: str = Field(default=FLUID_SUPPRESSED_DOMAIN)
    whole_ratio: float = Field(default=1.65, gt=1)

    def reads(self) -> Sequence[str]:
        """Domains the segmenter looks at; substituting any other leaves its output unchanged."""
        return (self.enhancing_domain, self.whole_domain)

    def _threshold(self, image: np.ndarray, support: np.ndarray, ratio: float) -> np.ndarray:
        inside = image[support]
        if inside.size == 0:
            return np.zeros(image.shape, dtype=bool)
        return (image > ratio * np.median(inside)) & support

    def segment(self, images: np.ndarray, domains: Sequence[str], support: np.ndarray) -> Dict[str, np.ndarray]:
        """
        Args:
            images: (N, H, W) domain images
            domains: Domain labels aligned with ``images``
            support: (H, W) bool scene support

        Returns:
            {"enhancing": mask, "whole": mask}
        """
        domains = list(domains)
        for name in self.reads():
            if name not in domains:
                raise ConfigError(f"segmenter needs domain {name}, dataset has {domains}")
        return {
            "enhancing": self._threshold(images[domains.index(self.enhancing_domain)], support, self.enhancing_ratio),
            "whole": self._threshold(images[domains.index(self.whole_domain)], support, self.whole_ratio),
        }
