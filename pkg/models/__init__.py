"""Data models for multi-domain image imputation."""

from .config import (
    DEFAULT_DOMAINS,
    LossWeights,
    GeneratorConfig,
    DiscriminatorConfig,
    OptimizerConfig,
    DataConfig,
    TrainConfig,
)
from .domain import (
    PrimitiveKind,
    LesionKind,
    EllipsePrimitive,
    LesionPrimitive,
    PhantomScene,
    DomainSet,
    TargetMask,
    SplitName,
    PhantomDataset,
)
from .records import (
    StepReport,
    ImageMetrics,
    DomainAggregate,
    MetricsReport,
    EssentialityRow,
    EssentialityTable,
    GradCheckResult,
    RunManifest,
)

__all__ = [
    "DEFAULT_DOMAINS",
    "LossWeights",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "OptimizerConfig",
    "DataConfig",
    "TrainConfig",
    "PrimitiveKind",
    "LesionKind",
    "EllipsePrimitive",
    "LesionPrimitive",
    "PhantomScene",
    "DomainSet",
    "TargetMask",
    "SplitName",
    "PhantomDataset",
    "StepReport",
    "ImageMetrics",
    "DomainAggregate",
    "MetricsReport",
    "EssentialityRow",
    "EssentialityTable",
    "GradCheckResult",
    "RunManifest",
]
