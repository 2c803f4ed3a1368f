"""Shared fixtures: tiny network configs and a seeded phantom dataset."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from datasets import generate_dataset, save_dataset  # noqa: E402
from models.config import DiscriminatorConfig, GeneratorConfig, TrainConfig  # noqa: E402
from tensor import Tensor  # noqa: E402

N_DOMAINS = 4
SIZE = 32


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(1234)


@pytest.fixture
def generator_config():
    return GeneratorConfig(n_domains=N_DOMAINS, base_channels=2, levels=2)


@pytest.fixture
def discriminator_config():
    return DiscriminatorConfig(n_domains=N_DOMAINS, base_channels=2)


@pytest.fixture
def train_config(generator_config, discriminator_config):
    """Four steps, validation and checkpoints every second step."""
    return TrainConfig(
        steps=4,
        batch_size=1,
        seed=3,
        generator=generator_config,
        discriminator=discriminator_config,
        val_every=2,
        log_every=2,
        checkpoint_every=2,
    )


@pytest.fixture(scope="session")
def phantom_dataset():
    """Three subjects (one per split), two slices each, 32x32."""
    return generate_dataset(n_subjects=3, slices_per_subject=2, height=SIZE, width=SIZE, seed=0)


@pytest.fixture(scope="session")
def dataset_dir(phantom_dataset, tmp_path_factory):
    return save_dataset(phantom_dataset, tmp_path_factory.mktemp("phantom"))


@pytest.fixture
def domain_batch(rng):
    """Random positive images keyed by domain, (2, 1, 32, 32) each."""
    return {k: Tensor(rng.uniform(0.1, 1.0, size=(2, 1, SIZE, SIZE))) for k in range(N_DOMAINS)}
