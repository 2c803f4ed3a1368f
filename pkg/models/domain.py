"""Domain records: phantom scenes, aligned multi-contrast sets and target masks."""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tensor import Tensor


class PrimitiveKind(str, Enum):
    """Tissue class of an ellipse primitive."""
    HEAD = "head"
    TISSUE = "tissue"
    FLUID = "fluid"


class LesionKind(str, Enum):
    """Lesion class; ENHANCING is visible only in the exclusive-information domain."""
    EDEMA = "edema"
    ENHANCING = "enhancing"


class EllipsePrimitive(BaseModel):
    """Ellipsoid cut by axial slices; coordinates are in the unit square."""
    cx: float = Field(..., ge=0, le=1)
    cy: float = Field(..., ge=0, le=1)
    a: float = Field(..., gt=0, le=0.5, description="Semi-axis along x")
    b: float = Field(..., gt=0, le=0.5, description="Semi-axis along y")
    theta: float = Field(default=0.0, description="Rotation in degrees")
    zc: float = Field(default=0.0, description="Slice-axis center")
    c: float = Field(default=1.0, gt=0, description="Slice-axis semi-axis")
    tissue: float = Field(default=0.5, ge=0, le=1, description="Base tissue value")
    kind: PrimitiveKind = Field(default=PrimitiveKind.TISSUE)

    @model_validator(mode="after")
    def _inside_unit_square(self) -> "EllipsePrimitive":
        reach = max(self.a, self.b)
        if not (reach <= self.cx <= 1 - reach and reach <= self.cy <= 1 - reach):
            raise ValueError("primitive extends outside the unit square")
        return self


class LesionPrimitive(EllipsePrimitive):
    """Lesion ellipsoid with a class-dependent visibility profile."""
    lesion: LesionKind = Field(default=LesionKind.EDEMA)


class PhantomScene(BaseModel):
    """Latent scene shared by every contrast of one subject."""
    subject_id: str = Field(..., description="Subject identifier")
    primitives: List[EllipsePrimitive] = Field(..., description="Head first, then inner structures")
    lesions: List[LesionPrimitive] = Field(default_factory=list)


class DomainSet(BaseModel):
    """One pixel-aligned record of N contrast images of the same slice."""
    subject_id: str
    slice_id: int = Field(..., ge=0)
    domains: List[str] = Field(..., description="Domain labels, index-aligned with images")
    images: np.ndarray = Field(..., description="(N, H, W) float64 images")
    support: np.ndarray = Field(..., description="(H, W) bool scene support")
    enhancing_mask: np.ndarray = Field(..., description="(H, W) bool ground truth, exclusive lesion")
    whole_mask: np.ndarray = Field(..., description="(H, W) bool ground truth, all lesion tissue")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _aligned(self) -> "DomainSet":
        if self.images.ndim != 3 or self.images.shape[0] != len(self.domains):
            raise ValueError("images must have shape (N, H, W) with one image per domain")
        hw = self.images.shape[1:]
        for mask in (self.support, self.enhancing_mask, self.whole_mask):
            if mask.shape != hw:
                raise ValueError("masks must share the image height/width")
        return self

    @property
    def n_domains(self) -> int:
        return len(self.domains)

    def image(self, domain: int) -> np.ndarray:
        """Image of one domain as a (1, H, W) array."""
        return self.images[domain][None]

    def replace(self, **changes) -> "DomainSet":
        return self.model_copy(update=changes)


class TargetMask(BaseModel):
    """One-hot target-domain encoding in spatial and vector form."""
    domain: int = Field(..., ge=0, description="Target domain index")
    n_domains: int = Field(..., ge=2)
    batch_size: int = Field(default=1, ge=1)
    height: int = Field(..., ge=1)
    width: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _domain_in_range(self) -> "TargetMask":
        if self.domain >= self.n_domains:
            raise ValueError(f"target domain {self.domain} outside [0, {self.n_domains})")
        return self

    @classmethod
    def like(cls, domain: int, n_domains: int, image: Tensor) -> "TargetMask":
        """Mask matching the batch and spatial size of an image tensor (B, 1, H, W)."""
        batch, _, height, width = image.shape
        return cls(domain=domain, n_domains=n_domains, batch_size=batch, height=height, width=width)

    @property
    def vector_form(self) -> Tensor:
        vec = np.zeros((self.batch_size, self.n_domains))
        vec[:, self.domain] = 1.0
        return Tensor(vec)

    @property
    def spatial_form(self) -> Tensor:
        spatial = np.zeros((self.batch_size, self.n_domains, self.height, self.width))
        spatial[:, self.domain] = 1.0
        return Tensor(spatial)


class SplitName(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class PhantomDataset(BaseModel):
    """Generated dataset with its subject-wise split assignment."""
    domains: List[str]
    seed: int
    height: int
    width: int
    sets: List[DomainSet] = Field(default_factory=list)
    splits: dict = Field(default_factory=dict, description="subject_id -> split name")
    scenes: Optional[List[PhantomScene]] = Field(default=None)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def split(self, name: SplitName) -> List[DomainSet]:
        name = SplitName(name)
        return [s for s in self.sets if self.splits.get(s.subject_id) == name.value]

    def subjects(self, name: Optional[SplitName] = None) -> List[str]:
        ordered = list(dict.fromkeys(s.subject_id for s in self.sets))
        if name is None:
            return ordered
        return [sid for sid in ordered if self.splits.get(sid) == SplitName(name).value]
