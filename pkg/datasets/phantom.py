"""
Ellipse phantom scenes and their multi-contrast renderings.

A scene is a set of ellipsoids (head, inner tissue, fluid) plus lesions.
Each axial slice cuts every ellipsoid into an ellipse whose semi-axes shrink
with the distance from the ellipsoid center along the slice axis. Every
contrast domain maps the shared tissue map through its own intensity curve,
so all domains of one slice are pixel-aligned views of the same anatomy.

Enhancing lesion cores are only visible in T1Gd; in every other domain they
render exactly like the surrounding edema.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from models.domain import EllipsePrimitive, LesionKind, LesionPrimitive, PhantomScene, PrimitiveKind
from utils.exceptions import ConfigError

HEAD_TISSUE = 0.45
TISSUE_RANGE = (0.15, 0.75)
FLUID_RANGE = (0.02, 0.08)
RIM_INNER = 0.75  # quadratic form threshold: rim where 0.75 < q <= 1

EXCLUSIVE_DOMAIN = "T1Gd"
FLUID_SUPPRESSED_DOMAIN = "T2F"


@dataclass
class SliceLayers:
    """Per-pixel latent layers of one slice, shared by every contrast."""
    tissue: np.ndarray
    fluid: np.ndarray
    support: np.ndarray
    rim: np.ndarray
    edema: np.ndarray
    enhancing: np.ndarray


def _t1_curve(layers: SliceLayers, rim_weight: float) -> np.ndarray:
    image = 0.3 + 0.5 * layers.tissue + rim_weight * layers.rim
    return np.where(layers.edema, np.maximum(image - 0.12, 0.05), image)


def contrast_t1(layers: SliceLayers) -> np.ndarray:
    """Increasing tissue curve with a bright head rim; edema slightly darker."""
    return _t1_curve(layers, 0.15)


def contrast_t2(layers: SliceLayers) -> np.ndarray:
    """Decreasing tissue curve (fluid bright); edema hyperintense."""
    image = 1.0 - 0.6 * layers.tissue
    return np.where(layers.edema, 1.35, image)


def contrast_t2f(layers: SliceLayers) -> np.ndarray:
    """T2 curve with fluid suppressed; edema strongly hyperintense."""
    image = np.where(layers.fluid, 0.1, 1.0 - 0.6 * layers.tissue)
    return np.where(layers.edema, 1.8, image)


def contrast_t1gd(layers: SliceLayers) -> np.ndarray:
    """T1 curve without the rim; enhancing cores light up."""
    image = _t1_curve(layers, 0.0)
    return np.where(layers.enhancing, 1.6, image)


CONTRASTS: Dict[str, Callable[[SliceLayers], np.ndarray]] = {
    "T1": contrast_t1,
    "T2": contrast_t2,
    "T2F": contrast_t2f,
    "T1Gd": contrast_t1gd,
}


def check_domains(domains: Sequence[str]) -> None:
    unknown = [d for d in domains if d not in CONTRASTS]
    if unknown:
        raise ConfigError(f"unknown contrast domains {unknown}; supported: {sorted(CONTRASTS)}")


def slice_positions(slices: int) -> np.ndarray:
    """Slice-axis coordinates of ``slices`` evenly spaced axial cuts."""
    if slices == 1:
        return np.zeros(1)
    return np.linspace(-0.5, 0.5, slices)


def pixel_grid(height: int, width: int):
    """Pixel-center coordinates in the unit square."""
    y = (np.arange(height) + 0.5) / height
    x = (np.arange(width) + 0.5) / width
    return np.meshgrid(x, y)


def quadratic_form(primitive: EllipsePrimitive, z: float, grid) -> np.ndarray:
    """
    Normalized ellipse equation of a primitive cut at slice position ``z``.

    Values <= 1 lie inside the cross-section; +inf everywhere when the slice
    misses the ellipsoid.
    """
    X, Y = grid
    depth = (z - primitive.zc) / primitive.c
    if abs(depth) >= 1.0:
        return np.full(X.shape, np.inf)
    scale = np.sqrt(1.0 - depth * depth)
    a, b = primitive.a * scale, primitive.b * scale
    theta = np.radians(primitive.theta)
    dx, dy = X - primitive.cx, Y - primitive.cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return (u / a) ** 2 + (v / b) ** 2


def slice_layers(scene: PhantomScene, z: float, height: int, width: int, include_enhancing: bool = True) -> SliceLayers:
    """
    Rasterize a scene at one slice position.

    Primitives are painted in order, later ones overwriting earlier ones.
    ``include_enhancing=False`` renders the scene with its enhancing cores removed.
    """
    grid = pixel_grid(height, width)
    tissue = np.zeros((height, width))
    fluid = np.zeros((height, width), dtype=bool)
    support = np.zeros((height, width), dtype=bool)
    rim = np.zeros((height, width))

    for primitive in scene.primitives:
        q = quadratic_form(primitive, z, grid)
        inside = q <= 1.0
        if primitive.kind == PrimitiveKind.HEAD:
            support |= inside
            rim = np.where(inside & (q > RIM_INNER), 1.0, rim)
        inside &= support
        tissue[inside] = primitive.tissue
        fluid[inside] = primitive.kind == PrimitiveKind.FLUID

    edema = np.zeros((height, width), dtype=bool)
    enhancing = np.zeros((height, width), dtype=bool)
    for lesion in scene.lesions:
        inside = (quadratic_form(lesion, z, grid) <= 1.0) & support
        if lesion.lesion == LesionKind.EDEMA:
            edema |= inside
        elif include_enhancing:
            enhancing |= inside
    enhancing &= edema
    fluid &= ~edema
    return SliceLayers(tissue=tissue, fluid=fluid, support=support, rim=rim, edema=edema, enhancing=enhancing)


def render_slice(layers: SliceLayers, domains: Sequence[str]) -> np.ndarray:
    """(N, H, W) images of one slice; background is exactly zero."""
    check_domains(domains)
    images = np.stack([CONTRASTS[d](layers) for d in domains])
    return np.where(layers.support[None], images, 0.0)


def random_scene(subject_id: str, rng: np.random.Generator) -> PhantomScene:
    """Draw one subject's latent anatomy."""
    primitives: List[EllipsePrimitive] = [
        EllipsePrimitive(
            cx=0.5, cy=0.5,
            a=rng.uniform(0.36, 0.42), b=rng.uniform(0.40, 0.46),
            theta=rng.uniform(-10, 10), zc=0.0, c=1.2,
            tissue=HEAD_TISSUE, kind=PrimitiveKind.HEAD,
        )
    ]

    for _ in range(int(rng.integers(4, 7))):
        radius, angle = rng.uniform(0, 0.18), rng.uniform(0, 2 * np.pi)
        primitives.append(EllipsePrimitive(
            cx=0.5 + radius * np.cos(angle), cy=0.5 + radius * np.sin(angle),
            a=rng.uniform(0.04, 0.14), b=rng.uniform(0.04, 0.14),
            theta=rng.uniform(0, 180), zc=rng.uniform(-0.4, 0.4), c=rng.uniform(0.3, 0.8),
            tissue=rng.uniform(*TISSUE_RANGE), kind=PrimitiveKind.TISSUE,
        ))

    for side in (-1, 1):
        primitives.append(EllipsePrimitive(
            cx=0.5 + side * rng.uniform(0.03, 0.07), cy=rng.uniform(0.42, 0.55),
            a=rng.uniform(0.03, 0.06), b=rng.uniform(0.08, 0.14),
            theta=side * rng.uniform(0, 15), zc=rng.uniform(-0.2, 0.2), c=rng.uniform(0.4, 0.8),
            tissue=rng.uniform(*FLUID_RANGE), kind=PrimitiveKind.FLUID,
        ))

    lesions: List[LesionPrimitive] = []
    for _ in range(int(rng.integers(1, 3))):
        radius, angle = rng.uniform(0, 0.2), rng.uniform(0, 2 * np.pi)
        cx, cy = 0.5 + radius * np.cos(angle), 0.5 + radius * np.sin(angle)
        a, b = rng.uniform(0.06, 0.11), rng.uniform(0.06, 0.11)
        theta, zc, c = rng.uniform(0, 180), rng.uniform(-0.3, 0.3), rng.uniform(0.25, 0.5)
        lesions.append(LesionPrimitive(cx=cx, cy=cy, a=a, b=b, theta=theta, zc=zc, c=c, lesion=LesionKind.EDEMA))
        lesions.append(LesionPrimitive(
            cx=cx, cy=cy, a=0.45 * a, b=0.45 * b, theta=theta, zc=zc, c=0.6 * c, lesion=LesionKind.ENHANCING,
        ))

    return PhantomScene(subject_id=subject_id, primitives=primitives, lesions=lesions)
