"""Intensity normalization and spatial augmentation of aligned domain sets."""

from typing import Optional

import numpy as np
from scipy import ndimage

from models.domain import DomainSet
from utils.exceptions import DataError

SCALE_RANGE = (0.9, 1.1)
FLIP_PROBABILITY = 0.5
UNIT_SCALE_TOLERANCE = 1e-12


def normalize(image: np.ndarray) -> np.ndarray:
    """
    Scale an image to unit standard deviation over its nonzero pixels.

    Zero pixels stay exactly zero. An image whose scale is already 1 within
    ``UNIT_SCALE_TOLERANCE`` is returned unchanged, so normalizing twice gives
    the same array bitwise.

    Raises:
        DataError: no nonzero pixels, or the nonzero pixels are constant
    """
    image = np.asarray(image, dtype=np.float64)
    nonzero = image != 0
    if not nonzero.any():
        raise DataError("normalize: all-zero image has no defined scale")
    std = image[nonzero].std()
    if std == 0:
        raise DataError("normalize: nonzero pixels are constant")
    if abs(std - 1.0) <= UNIT_SCALE_TOLERANCE:
        return image.copy()
    return image / std


def normalize_set(record: DomainSet) -> DomainSet:
    """Normalize every domain image of a record independently."""
    return record.replace(images=np.stack([normalize(image) for image in record.images]))


def _zoom_about_center(plane: np.ndarray, scale: float, order: int) -> np.ndarray:
    """Magnify ``plane`` by ``scale`` about its center, keeping the shape."""
    center = (np.array(plane.shape) - 1) / 2.0
    matrix = np.eye(2) / scale
    offset = center - matrix @ center
    return ndimage.affine_transform(plane, matrix, offset=offset, order=order, mode="constant", cval=0.0)


def augment(
    record: DomainSet,
    rng: np.random.Generator,
    scale: Optional[float] = None,
    flip: Optional[bool] = None,
) -> DomainSet:
    """
    Random scale in [0.9, 1.1] and a lateral flip with probability 0.5.

    The same draw is applied to every domain image and to the masks, so the
    record stays pixel-aligned. Both draws are always consumed from ``rng``
    even when forced, which keeps the random stream independent of the forcing.

    Args:
        record: Aligned domain set
        rng: Random generator
        scale: Forced scale factor (drawn when None)
        flip: Forced flip decision (drawn when None)
    """
    drawn_scale = rng.uniform(*SCALE_RANGE)
    drawn_flip = rng.random() < FLIP_PROBABILITY
    scale = drawn_scale if scale is None else float(scale)
    flip = drawn_flip if flip is None else bool(flip)

    images = np.stack([_zoom_about_center(image, scale, order=1) for image in record.images])
    masks = {
        name: _zoom_about_center(getattr(record, name).astype(np.float64), scale, order=0) > 0.5
        for name in ("support", "enhancing_mask", "whole_mask")
    }
    images = np.where(masks["support"][None], images, 0.0)
    if flip:
        images = images[:, :, ::-1]
        masks = {name: mask[:, ::-1] for name, mask in masks.items()}
    return record.replace(
        images=np.ascontiguousarray(images),
        **{name: np.ascontiguousarray(mask) for name, mask in masks.items()},
    )
