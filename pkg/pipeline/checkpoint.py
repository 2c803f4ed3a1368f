"""Checkpoint directories: network snapshots, optimizer state, RNG state and config header."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from models.config import TrainConfig
from networks import Adam, DiscriminatorNet, GeneratorNet
from tensor import load_tensors, save_tensors
from utils.config_loader import dump_key_value, load_train_config
from utils.exceptions import DataError

PathLike = Union[str, Path]

GENERATOR_FILE = "generator.cgs"
DISCRIMINATOR_FILE = "discriminator.cgs"
OPTIMIZER_G_FILE = "optimizer_generator.cgs"
OPTIMIZER_D_FILE = "optimizer_discriminator.cgs"
CONFIG_FILE = "config.txt"
META_FILE = "meta.json"
LOG_FILE = "training_log.csv"


class CheckpointMeta(BaseModel):
    """Training progress needed to resume exactly where a run stopped."""
    step: int = Field(..., ge=0, description="Completed steps")
    domains: List[str]
    best_step: Optional[int] = None
    best_val_nmse: Optional[float] = None
    initial_val_nmse: Dict[str, float] = Field(default_factory=dict)
    rng_state: Dict[str, Any] = Field(default_factory=dict, description="numpy bit generator state")


def save_checkpoint(
    path: PathLike,
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    config: TrainConfig,
    meta: CheckpointMeta,
    optimizers: Optional[Tuple[Adam, Adam]] = None,
) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    save_tensors(root / GENERATOR_FILE, generator.state_dict())
    save_tensors(root / DISCRIMINATOR_FILE, discriminator.state_dict())
    if optimizers is not None:
        save_tensors(root / OPTIMIZER_G_FILE, optimizers[0].state_dict())
        save_tensors(root / OPTIMIZER_D_FILE, optimizers[1].state_dict())
    (root / CONFIG_FILE).write_text(dump_key_value(config) + "\n", encoding="utf-8")
    (root / META_FILE).write_text(meta.model_dump_json(indent=2), encoding="utf-8")
    return root


def resolve_checkpoint(path: PathLike) -> Path:
    """Accept a checkpoint directory, or a run directory holding ``checkpoints/best`` or ``checkpoints/last``."""
    root = Path(path)
    if (root / GENERATOR_FILE).exists():
        return root
    for name in ("best", "last"):
        candidate = root / "checkpoints" / name
        if (candidate / GENERATOR_FILE).exists():
            return candidate
    raise DataError(f"no checkpoint found at {root}")


def load_checkpoint(path: PathLike) -> Dict[str, Any]:
    """
    Rebuild both networks from a checkpoint.

    Returns:
        {"path", "config", "meta", "generator", "discriminator", "optimizer_states"}
    """
    root = resolve_checkpoint(path)
    config = load_train_config(root / CONFIG_FILE)
    meta_path = root / META_FILE
    if not meta_path.exists():
        raise DataError(f"{meta_path}: checkpoint metadata missing")
    meta = CheckpointMeta.model_validate_json(meta_path.read_text(encoding="utf-8"))

    generator = GeneratorNet(config.generator)
    generator.load_state_dict(load_tensors(root / GENERATOR_FILE))
    discriminator = DiscriminatorNet(config.discriminator)
    discriminator.load_state_dict(load_tensors(root / DISCRIMINATOR_FILE))

    optimizer_states = None
    if (root / OPTIMIZER_G_FILE).exists() and (root / OPTIMIZER_D_FILE).exists():
        optimizer_states = (load_tensors(root / OPTIMIZER_G_FILE), load_tensors(root / OPTIMIZER_D_FILE))
    return {
        "path": root,
        "config": config,
        "meta": meta,
        "generator": generator,
        "discriminator": discriminator,
        "optimizer_states": optimizer_states,
    }


def rng_from_state(state: Dict[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
