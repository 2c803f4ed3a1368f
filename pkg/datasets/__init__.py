"""Synthetic multi-contrast phantom data."""

from .phantom import CONTRASTS, EXCLUSIVE_DOMAIN, FLUID_SUPPRESSED_DOMAIN, random_scene, render_slice, slice_layers
from .generator import (
    SyntheticPhantomGenerator,
    generate_dataset,
    save_dataset,
    load_dataset,
    read_manifest,
    split_counts,
)
from .transforms import normalize, normalize_set, augment
from .segmentation import ThresholdSegmenter

__all__ = [
    "CONTRASTS",
    "EXCLUSIVE_DOMAIN",
    "FLUID_SUPPRESSED_DOMAIN",
    "random_scene",
    "render_slice",
    "slice_layers",
    "SyntheticPhantomGenerator",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "read_manifest",
    "split_counts",
    "normalize",
    "normalize_set",
    "augment",
    "ThresholdSegmenter",
]
