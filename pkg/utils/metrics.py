"""Evaluation measures: NMSE, SSIM, Dice and the mean-image baseline."""

from typing import Sequence

import numpy as np

from models.domain import DomainSet
from networks.losses import ssim_map
from tensor import Tensor, no_grad
from .exceptions import DataError, DimensionError


def nmse(x_true: np.ndarray, x_hat: np.ndarray) -> float:
    """||x_true - x_hat||^2 / ||x_true||^2."""
    x_true, x_hat = np.asarray(x_true, dtype=np.float64), np.asarray(x_hat, dtype=np.float64)
    if x_true.shape != x_hat.shape:
        raise DimensionError("nmse", "all", expected=x_true.shape, actual=x_hat.shape)
    energy = float(np.sum(x_true * x_true))
    if energy == 0.0:
        raise DataError("nmse: reference image has zero norm")
    diff = x_true - x_hat
    return float(np.sum(diff * diff)) / energy


def ssim_scalar(x_true: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean per-pixel SSIM of two images, evaluated with the training loss's ``ssim_map``."""
    x_true, x_hat = np.asarray(x_true, dtype=np.float64), np.asarray(x_hat, dtype=np.float64)
    if x_true.shape != x_hat.shape:
        raise DimensionError("ssim_scalar", "all", expected=x_true.shape, actual=x_hat.shape)
    plane = x_true.shape[-2:]
    if x_true.ndim < 2 or x_true.size != plane[0] * plane[1]:
        raise DimensionError("ssim_scalar", "all", expected="one 2-D image", actual=x_true.shape)
    with no_grad():
        similarity = ssim_map(Tensor(x_true.reshape(1, 1, *plane)), Tensor(x_hat.reshape(1, 1, *plane)))
    return float(similarity.data.mean())


def dice(y_gt: np.ndarray, y_pred: np.ndarray) -> float:
    """2|gt & pred| / (|gt| + |pred|); two empty masks agree perfectly (1.0)."""
    y_gt, y_pred = np.asarray(y_gt), np.asarray(y_pred)
    if y_gt.shape != y_pred.shape:
        raise DimensionError("dice", "all", expected=y_gt.shape, actual=y_pred.shape)
    for mask in (y_gt, y_pred):
        if not np.isin(mask, (0, 1)).all():
            raise DataError("dice: masks must be binary")
    gt, pred = y_gt.astype(bool), y_pred.astype(bool)
    total = int(gt.sum()) + int(pred.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((gt & pred).sum()) / total


def mean_image_baseline(records: Sequence[DomainSet], domain: int) -> np.ndarray:
    """Pixelwise mean of one domain over ``records`` (the oracle every imputer should beat)."""
    if not records:
        raise DataError("mean_image_baseline: no records")
    return np.mean([record.images[domain] for record in records], axis=0)
