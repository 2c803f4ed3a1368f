"""Generate, split, save and load synthetic multi-contrast phantom datasets."""

from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from models.config import DataConfig
from models.domain import DomainSet, PhantomDataset, PhantomScene, SplitName
from tensor import load_tensors, save_tensors
from utils.exceptions import ConfigError, DataError
from utils.logger import get_logger
from .phantom import check_domains, random_scene, render_slice, slice_layers, slice_positions

MANIFEST_NAME = "manifest.txt"
MANIFEST_FORMAT = "collagan-phantom"
MANIFEST_VERSION = 1
SPLIT_FRACTION = 0.1

PathLike = Union[str, Path]


def split_counts(n_subjects: int) -> Dict[str, int]:
    """8:1:1 subject counts; validation and test get at least one subject each."""
    if n_subjects < 3:
        raise ConfigError(f"need >= 3 subjects for a train/val/test split, got {n_subjects}")
    held_out = max(1, int(round(SPLIT_FRACTION * n_subjects)))
    return {"train": n_subjects - 2 * held_out, "val": held_out, "test": held_out}


class SyntheticPhantomGenerator:
    """Render phantom subjects into aligned domain sets with a subject-wise split."""

    def __init__(self, config: Optional[DataConfig] = None):
        self.config = config or DataConfig()
        check_domains(self.config.domains)
        self.logger = get_logger("data")

    def generate_scene(self, index: int) -> PhantomScene:
        """Scene of subject ``index``; drawn from its own seed-derived stream."""
        rng = np.random.default_rng([self.config.seed, index])
        return random_scene(f"S{index:03d}", rng)

    def render_subject(self, scene: PhantomScene) -> List[DomainSet]:
        cfg = self.config
        sets = []
        for slice_id, z in enumerate(slice_positions(cfg.slices_per_subject)):
            layers = slice_layers(scene, z, cfg.height, cfg.width)
            sets.append(DomainSet(
                subject_id=scene.subject_id,
                slice_id=slice_id,
                domains=list(cfg.domains),
                images=render_slice(layers, cfg.domains),
                support=layers.support,
                enhancing_mask=layers.enhancing,
                whole_mask=layers.edema,
            ))
        return sets

    def assign_splits(self, subject_ids: List[str]) -> Dict[str, str]:
        counts = split_counts(len(subject_ids))
        order = np.random.default_rng(self.config.seed).permutation(len(subject_ids))
        labels = (
            [SplitName.TRAIN.value] * counts["train"]
            + [SplitName.VAL.value] * counts["val"]
            + [SplitName.TEST.value] * counts["test"]
        )
        return {subject_ids[i]: label for i, label in zip(order, labels)}

    def generate(self) -> PhantomDataset:
        cfg = self.config
        self.logger.info(
            f"Generating {cfg.n_subjects} subjects x {cfg.slices_per_subject} slices "
            f"({cfg.height}x{cfg.width}, domains={cfg.domains}, seed={cfg.seed})"
        )
        scenes = [self.generate_scene(i) for i in range(cfg.n_subjects)]
        sets = [record for scene in scenes for record in self.render_subject(scene)]
        splits = self.assign_splits([scene.subject_id for scene in scenes])
        dataset = PhantomDataset(
            domains=list(cfg.domains),
            seed=cfg.seed,
            height=cfg.height,
            width=cfg.width,
            sets=sets,
            splits=splits,
            scenes=scenes,
        )
        for name in SplitName:
            self.logger.info(f"  {name.value}: {len(dataset.split(name))} images")
        return dataset


def generate_dataset(
    n_subjects: int,
    slices_per_subject: int,
    height: int,
    width: int,
    seed: int,
    domains: Optional[List[str]] = None,
) -> PhantomDataset:
    """Deterministic phantom dataset; identical arguments give bitwise-identical data."""
    try:
        config = DataConfig(
            n_subjects=n_subjects,
            slices_per_subject=slices_per_subject,
            height=height,
            width=width,
            seed=seed,
            **({"domains": domains} if domains is not None else {}),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid dataset parameters: {exc}") from exc
    return SyntheticPhantomGenerator(config).generate()


# *** on-disk format ***

def _subject_file(subject_id: str) -> str:
    return f"{subject_id}.cgs"


def save_dataset(dataset: PhantomDataset, path: PathLike) -> Path:
    """
    Write ``dataset`` as a directory: ``manifest.txt`` plus one snapshot per subject.

    The manifest is plain ``key=value`` text followed by one
    ``subject=<id> slices=<n> split=<name> file=<name>`` line per subject.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = [
        f"format={MANIFEST_FORMAT}",
        f"version={MANIFEST_VERSION}",
        f"seed={dataset.seed}",
        f"height={dataset.height}",
        f"width={dataset.width}",
        f"domains={','.join(dataset.domains)}",
    ]
    for subject_id in dataset.subjects():
        records = [s for s in dataset.sets if s.subject_id == subject_id]
        save_tensors(root / _subject_file(subject_id), {
            "slice_ids": np.array([r.slice_id for r in records], dtype=np.float64),
            "images": np.stack([r.images for r in records]),
            "support": np.stack([r.support for r in records]).astype(np.float64),
            "enhancing_mask": np.stack([r.enhancing_mask for r in records]).astype(np.float64),
            "whole_mask": np.stack([r.whole_mask for r in records]).astype(np.float64),
        })
        lines.append(
            f"subject={subject_id} slices={len(records)} "
            f"split={dataset.splits[subject_id]} file={_subject_file(subject_id)}"
        )
    (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


def read_manifest(path: PathLike) -> Dict[str, object]:
    """Parse a dataset manifest into header fields and a subject list."""
    manifest_path = Path(path) / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"{manifest_path}: dataset manifest not found")
    header: Dict[str, str] = {}
    subjects: List[Dict[str, str]] = []
    for raw in manifest_path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("subject="):
            subjects.append(dict(token.split("=", 1) for token in line.split()))
            continue
        if "=" not in line:
            raise DataError(f"{manifest_path}: malformed line '{line}'")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()

    if header.get("format") != MANIFEST_FORMAT:
        raise DataError(f"{manifest_path}: not a phantom dataset manifest")
    version = int(header.get("version", -1))
    if version != MANIFEST_VERSION:
        raise DataError(
            f"{manifest_path}: dataset version {version} is not supported (expected {MANIFEST_VERSION})"
        )
    return {
        "seed": int(header["seed"]),
        "height": int(header["height"]),
        "width": int(header["width"]),
        "domains": header["domains"].split(","),
        "subjects": subjects,
    }


def load_dataset(path: PathLike) -> PhantomDataset:
    """Inverse of ``save_dataset``; scenes are not stored and come back as None."""
    root = Path(path)
    manifest = read_manifest(root)
    sets: List[DomainSet] = []
    splits: Dict[str, str] = {}
    for entry in manifest["subjects"]:
        subject_id = entry["subject"]
        arrays = load_tensors(root / entry["file"])
        count = int(entry["slices"])
        if arrays["images"].shape[0] != count:
            raise DataError(f"{entry['file']}: manifest says {count} slices, file has {arrays['images'].shape[0]}")
        splits[subject_id] = entry["split"]
        for i in range(count):
            sets.append(DomainSet(
                subject_id=subject_id,
                slice_id=int(arrays["slice_ids"][i]),
                domains=list(manifest["domains"]),
                images=arrays["images"][i],
                support=arrays["support"][i] > 0.5,
                enhancing_mask=arrays["enhancing_mask"][i] > 0.5,
                whole_mask=arrays["whole_mask"][i] > 0.5,
            ))
    return PhantomDataset(
        domains=list(manifest["domains"]),
        seed=manifest["seed"],
        height=manifest["height"],
        width=manifest["width"],
        sets=sets,
        splits=splits,
    )
