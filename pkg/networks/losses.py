"""Training objectives: multiple cycle consistency (L1 and SSIM), LSGAN and domain classification."""

from __future__ import annotations

from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.config import LossWeights
from tensor import Tensor
from tensor import functional as F
from utils.exceptions import DimensionError

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 7
SSIM_MIN_RANGE = 1e-3
SSIM_LOG_FLOOR = 1e-12


class CycleBundle(BaseModel):
    """Forward fake, backward reconstructions and originals of one target domain."""
    target: int = Field(..., ge=0)
    n_domains: int = Field(..., ge=2)
    fake: Tensor
    reconstructions: Dict[int, Tensor] = Field(..., description="x~_{k'|k} keyed by k'")
    originals: Dict[int, Tensor] = Field(..., description="x_{k'} keyed by k'")
    self_reconstruction: Optional[Tensor] = Field(None, description="x~_{k|k}")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _complete(self) -> "CycleBundle":
        expected = sorted(k for k in range(self.n_domains) if k != self.target)
        if sorted(self.reconstructions) != expected:
            raise ValueError(f"backward reconstructions must cover domains {expected}, got {sorted(self.reconstructions)}")
        missing = [k for k in expected if k not in self.originals]
        if missing:
            raise ValueError(f"originals missing for domains {missing}")
        return self


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, "all", expected=a.shape, actual=b.shape)


# *** multiple cycle consistency ***

def mcc_loss(bundle: CycleBundle) -> Tensor:
    """Sum over k' != k of the pixel-mean |x_k' - x~_{k'|k}|."""
    total = None
    for domain in sorted(bundle.reconstructions):
        original, recon = bundle.originals[domain], bundle.reconstructions[domain]
        _same_shape("mcc_loss", original, recon)
        term = F.mean_abs(original - recon)
        total = term if total is None else total + term
    return total


# *** SSIM ***

def ssim_map(x: Tensor, y: Tensor, window: int = SSIM_WINDOW) -> Tensor:
    """
    Per-pixel SSIM between two image batches (B, C, H, W).

    Local statistics are uniform-window means over a reflect-padded
    neighbourhood centred on each pixel; C1 = (k1 L)^2, C2 = (k2 L)^2 with the
    dynamic range L taken per sample over both images.
    """
    _same_shape("ssim_map", x, y)
    if x.ndim != 4:
        raise DimensionError("ssim_map", "rank", expected=4, actual=x.ndim)
    if window > x.shape[2] or window > x.shape[3]:
        raise DimensionError("ssim_map", "window", expected=f"<= {x.shape[2:]}", actual=window)

    batch = x.shape[0]
    dynamic_range = F.clamp_min(F.peak_to_peak(x, y), SSIM_MIN_RANGE).reshape(batch, 1, 1, 1)
    c1 = (dynamic_range * SSIM_K1) ** 2
    c2 = (dynamic_range * SSIM_K2) ** 2

    pad = window // 2

    def local_mean(t: Tensor) -> Tensor:
        return F.box_mean(F.pad_reflect(t, pad), window)

    mu_x, mu_y = local_mean(x), local_mean(y)
    var_x = local_mean(x * x) - mu_x * mu_x
    var_y = local_mean(y * y) - mu_y * mu_y
    cov = local_mean(x * y) - mu_x * mu_y

    numerator = (mu_x * mu_y * 2.0 + c1) * (cov * 2.0 + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return numerator / denominator


def ssim_map_loss(similarity: Tensor) -> Tensor:
    """-log(mean(1 + SSIM) / 2), with the argument floored before the log."""
    argument = (similarity + 1.0).mean() * 0.5
    return -F.log(F.clamp_min(argument, SSIM_LOG_FLOOR))


def ssim_loss(x: Tensor, y: Tensor) -> Tensor:
    return ssim_map_loss(ssim_map(x, y))


def mcc_ssim_loss(bundle: CycleBundle) -> Tensor:
    """Sum over k' != k of ssim_loss(x_k', x~_{k'|k})."""
    total = None
    for domain in sorted(bundle.reconstructions):
        term = ssim_loss(bundle.originals[domain], bundle.reconstructions[domain])
        total = term if total is None else total + term
    return total


# *** adversarial (least squares) ***

def gan_loss_dsc(patch_real: Tensor, patch_fake: Tensor) -> Tensor:
    """mean((D(x) - 1)^2) + mean(D(x~)^2)."""
    _same_shape("gan_loss_dsc", patch_real, patch_fake)
    return F.mean_sq(patch_real - 1.0) + F.mean_sq(patch_fake)


def gan_loss_gen(patch_fake: Tensor) -> Tensor:
    """mean((D(x~) - 1)^2)."""
    return F.mean_sq(patch_fake - 1.0)


# *** domain classification ***

def clsf_loss_real(class_logits: Tensor, true_domain: int) -> Tensor:
    """Cross-entropy of real images against their own domain (trains the classifier head)."""
    return F.cross_entropy(class_logits, true_domain)


def clsf_loss_fake(class_logits: Tensor, target_domain: int) -> Tensor:
    """Cross-entropy of generated images against the target domain (trains the generator)."""
    return F.cross_entropy(class_logits, target_domain)


# *** combined objectives ***

def total_generator_loss(
    bundle: CycleBundle,
    patch_fake: Tensor,
    logits_fake: Tensor,
    weights: LossWeights,
) -> Tuple[Tensor, Dict[str, Tensor]]:
    """
    Weighted generator objective.

    Args:
        bundle: Cycle outputs for the step's target domain
        patch_fake: Discriminator patch map of the self-reconstruction
        logits_fake: Discriminator class logits of the forward fake
        weights: Term weights

    Returns:
        (total, individual terms)
    """
    terms = {
        "l_mcc": mcc_loss(bundle),
        "l_mcc_ssim": mcc_ssim_loss(bundle),
        "l_gan_gen": gan_loss_gen(patch_fake),
        "l_clsf_fake": clsf_loss_fake(logits_fake, bundle.target),
    }
    total = (
        terms["l_mcc"] * weights.mcc
        + terms["l_mcc_ssim"] * weights.mcc_ssim
        + terms["l_gan_gen"] * weights.gan
        + terms["l_clsf_fake"] * weights.clsf
    )
    return total, terms


def total_discriminator_loss(
    patch_real: Tensor,
    patch_fake: Tensor,
    logits_real: Tensor,
    true_domain: int,
) -> Tuple[Tensor, Dict[str, Tensor]]:
    """L_gan^dsc + L_clsf^real. ``patch_fake`` must come from a detached fake."""
    terms = {
        "l_gan_dsc": gan_loss_dsc(patch_real, patch_fake),
        "l_clsf_real": clsf_loss_real(logits_real, true_domain),
    }
    return terms["l_gan_dsc"] + terms["l_clsf_real"], terms
