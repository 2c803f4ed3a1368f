"""Result records: training steps, metrics reports, study tables, run manifests."""

from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field


class StepReport(BaseModel):
    """Loss terms of one training step."""
    step: int = Field(..., ge=0)
    target_domain: int = Field(..., ge=0)
    l_mcc: float
    l_mcc_ssim: float
    l_gan_gen: float
    l_gan_dsc: float
    l_clsf_real: float
    l_clsf_fake: float
    total_generator: float
    total_discriminator: float
    val_nmse: Dict[str, float] = Field(default_factory=dict, description="Validation NMSE per domain")
    val_ssim: Dict[str, float] = Field(default_factory=dict, description="Validation SSIM per domain")

    def terms(self) -> Dict[str, float]:
        return {
            "l_mcc": self.l_mcc,
            "l_mcc_ssim": self.l_mcc_ssim,
            "l_gan_gen": self.l_gan_gen,
            "l_gan_dsc": self.l_gan_dsc,
            "l_clsf_real": self.l_clsf_real,
            "l_clsf_fake": self.l_clsf_fake,
        }


class ImageMetrics(BaseModel):
    """Imputation quality of one image."""
    subject_id: str
    slice_id: int
    target_domain: str
    nmse: float = Field(..., ge=0)
    ssim: float = Field(..., ge=-1, le=1)


class DomainAggregate(BaseModel):
    """Mean and standard deviation of the per-image metrics of one target domain."""
    target_domain: str
    n_images: int = Field(..., ge=0)
    nmse_mean: float
    nmse_std: float
    ssim_mean: float
    ssim_std: float
    baseline_mean_image_nmse: Optional[float] = Field(None, description="Mean-image oracle NMSE")
    baseline_untrained_nmse: Optional[float] = Field(None, description="Untrained-network NMSE")


class MetricsReport(BaseModel):
    """Per-image and aggregate imputation results with their provenance."""
    experiment_tag: str = Field(..., description="e.g. 'T2F_Colla'")
    checkpoint: Optional[str] = None
    split: str = "test"
    records: List[ImageMetrics] = Field(default_factory=list)
    aggregates: List[DomainAggregate] = Field(default_factory=list)
    created_at: datetime = Field(default_factory=datetime.now)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_records(
        cls,
        experiment_tag: str,
        records: List[ImageMetrics],
        baselines: Optional[Dict[str, Dict[str, float]]] = None,
        **kwargs: Any,
    ) -> "MetricsReport":
        """Build a report whose aggregates are recomputed from ``records``."""
        baselines = baselines or {}
        aggregates = []
        for domain in dict.fromkeys(r.target_domain for r in records):
            nmse = np.array([r.nmse for r in records if r.target_domain == domain])
            ssim = np.array([r.ssim for r in records if r.target_domain == domain])
            extra = baselines.get(domain, {})
            aggregates.append(DomainAggregate(
                target_domain=domain,
                n_images=len(nmse),
                nmse_mean=float(nmse.mean()),
                nmse_std=float(nmse.std()),
                ssim_mean=float(ssim.mean()),
                ssim_std=float(ssim.std()),
                baseline_mean_image_nmse=extra.get("mean_image"),
                baseline_untrained_nmse=extra.get("untrained"),
            ))
        return cls(experiment_tag=experiment_tag, records=records, aggregates=aggregates, **kwargs)

    def aggregate_for(self, domain: str) -> Optional[DomainAggregate]:
        for aggregate in self.aggregates:
            if aggregate.target_domain == domain:
                return aggregate
        return None


class EssentialityRow(BaseModel):
    """Segmentation agreement when one domain is replaced by its imputation."""
    label: str = Field(..., description="'Original' or '<domain>_Colla'")
    substituted_domain: Optional[str] = None
    n_images: int = Field(..., ge=0)
    enhancing_dice_mean: float = Field(..., ge=0, le=1)
    enhancing_dice_std: float = Field(..., ge=0)
    whole_dice_mean: float = Field(..., ge=0, le=1)
    whole_dice_std: float = Field(..., ge=0)


class EssentialityTable(BaseModel):
    """Leave-one-out substitution study: one Original row plus one row per domain."""
    rows: List[EssentialityRow] = Field(default_factory=list)
    checkpoint: Optional[str] = None
    created_at: datetime = Field(default_factory=datetime.now)

    def row(self, label: str) -> EssentialityRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def degradation(self, label: str) -> float:
        """Drop in enhancing Dice of a substitution row relative to the Original row."""
        return self.row("Original").enhancing_dice_mean - self.row(label).enhancing_dice_mean


class GradCheckResult(BaseModel):
    """Outcome of a finite-difference check of one primitive or loss."""
    name: str
    max_relative_error: float = Field(..., ge=0)
    tolerance: float = Field(..., gt=0)
    seeds: int = Field(..., ge=1)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


class RunManifest(BaseModel):
    """Provenance written into every CLI output directory."""
    subcommand: str
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str = Field(..., description="git-describe-style version string")
    started_at: datetime = Field(default_factory=datetime.now)
    finished_at: Optional[datetime] = None
    outputs: List[str] = Field(default_factory=list)
    status: str = "running"
