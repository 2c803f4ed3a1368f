"""Configuration models for data generation, networks and training."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_DOMAINS = ["T1", "T2", "T2F", "T1Gd"]


class LossWeights(BaseModel):
    """Weights of the generator objective terms."""
    mcc: float = Field(default=10.0, ge=0, description="L1 multiple cycle consistency weight")
    mcc_ssim: float = Field(default=1.0, ge=0, description="SSIM multiple cycle consistency weight")
    gan: float = Field(default=1.0, ge=0, description="LSGAN generator weight")
    clsf: float = Field(default=1.0, ge=0, description="Fake-sample domain classification weight")

    @model_validator(mode="after")
    def _at_least_one_active(self) -> "LossWeights":
        if max(self.mcc, self.mcc_ssim, self.gan, self.clsf) <= 0:
            raise ValueError("at least one loss weight must be > 0")
        return self


class GeneratorConfig(BaseModel):
    """Architecture hyperparameters of the collaborative generator."""
    n_domains: int = Field(default=4, ge=2, description="Number of image domains N")
    base_channels: int = Field(default=4, ge=1, description="Channels per conv branch at level 0")
    levels: int = Field(default=2, ge=1, description="U-net depth L")
    slope: float = Field(default=0.2, gt=0, lt=1, description="Leaky ReLU slope")
    ccam_reduction: int = Field(default=4, ge=1, description="CCAM hidden width = max(C // reduction, 4)")

    def channels_at(self, level: int) -> int:
        """Channels of each CCNL conv branch at ``level``; a CCNL emits twice this."""
        return self.base_channels * (2 ** level)


class DiscriminatorConfig(BaseModel):
    """Architecture hyperparameters of the multi-resolution discriminator."""
    n_domains: int = Field(default=4, ge=2)
    base_channels: int = Field(default=4, ge=1)
    slope: float = Field(default=0.2, gt=0, lt=1)
    dropout: float = Field(default=0.5, ge=0, lt=1, description="Dropout rate on trunk features")


class OptimizerConfig(BaseModel):
    """Adaptive-moment optimizer constants."""
    lr_generator: float = Field(default=1e-4, gt=0)
    lr_discriminator: float = Field(default=1e-4, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class DataConfig(BaseModel):
    """Phantom dataset generation parameters."""
    n_subjects: int = Field(default=10, ge=3, description="Subjects (>= 3 so every split is nonempty)")
    slices_per_subject: int = Field(default=28, ge=1)
    height: int = Field(default=32, ge=8)
    width: int = Field(default=32, ge=8)
    seed: int = Field(default=0, ge=0)
    domains: List[str] = Field(default_factory=lambda: list(DEFAULT_DOMAINS))

    @field_validator("domains")
    @classmethod
    def _unique_domains(cls, value: List[str]) -> List[str]:
        if len(set(value)) != len(value) or len(value) < 2:
            raise ValueError("domains must be >= 2 distinct names")
        return value


class TrainConfig(BaseModel):
    """Everything that determines a training run."""
    steps: int = Field(default=4000, gt=0)
    batch_size: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)
    augment: bool = Field(default=True, description="Random scale/flip augmentation")
    weights: LossWeights = Field(default_factory=LossWeights)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = Field(default_factory=DiscriminatorConfig)
    checkpoint_every: int = Field(default=500, ge=1)
    val_every: int = Field(default=250, ge=1)
    log_every: int = Field(default=50, ge=1)
    val_max_images: Optional[int] = Field(default=None, ge=1, description="Cap on validation images")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "steps": 2000,
                "batch_size": 4,
                "seed": 7,
                "weights": {"mcc": 10, "mcc_ssim": 1, "gan": 1, "clsf": 1},
                "generator": {"base_channels": 8, "levels": 3},
            }
        }
    )

    @model_validator(mode="after")
    def _domain_counts_agree(self) -> "TrainConfig":
        if self.generator.n_domains != self.discriminator.n_domains:
            raise ValueError("generator and discriminator must agree on n_domains")
        return self

    @property
    def n_domains(self) -> int:
        return self.generator.n_domains
