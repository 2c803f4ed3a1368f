"""Generator, discriminator, objectives and optimizer."""

from .layers import (
    Module, Conv2d, ConvTranspose2d, Linear, CCNLUnit, CCAMUnit, ccnl_forward, ccam_forward, parameter_norms, frozen,
)
from .generator import GeneratorNet, impute, backward_cycle, run_cycles
from .discriminator import DiscriminatorNet, discriminate, patchgan_target, quarter_resolution
from .losses import (
    CycleBundle,
    mcc_loss,
    gan_loss_dsc,
    gan_loss_gen,
    clsf_loss_real,
    clsf_loss_fake,
    ssim_map,
    ssim_map_loss,
    ssim_loss,
    mcc_ssim_loss,
    total_generator_loss,
    total_discriminator_loss,
)
from .optim import Adam

__all__ = [
    "Module",
    "Conv2d",
    "ConvTranspose2d",
    "Linear",
    "CCNLUnit",
    "CCAMUnit",
    "ccnl_forward",
    "ccam_forward",
    "parameter_norms",
    "frozen",
    "GeneratorNet",
    "impute",
    "backward_cycle",
    "run_cycles",
    "DiscriminatorNet",
    "discriminate",
    "patchgan_target",
    "quarter_resolution",
    "CycleBundle",
    "mcc_loss",
    "gan_loss_dsc",
    "gan_loss_gen",
    "clsf_loss_real",
    "clsf_loss_fake",
    "ssim_map",
    "ssim_map_loss",
    "ssim_loss",
    "mcc_ssim_loss",
    "total_generator_loss",
    "total_discriminator_loss",
    "Adam",
]
