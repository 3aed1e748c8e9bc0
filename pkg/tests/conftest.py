import numpy as np
import pytest

from cdgzsl.config import ExperimentConfig
from cdgzsl.data import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def tiny_spec():
    # small enough for fast unit tests, still 3 seen domains + 1 unseen
    return SyntheticSpec(
        n_classes=10,
        n_domains=4,
        d_latent=3,
        d_feat=12,
        d_sem_intrinsic=3,
        d_sem_noise=4,
        samples_per_class_per_domain=8,
        unseen_fraction=0.2,
        seed=7,
    )


@pytest.fixture(scope="session")
def tiny_bundle(tiny_spec):
    return generate_synthetic(tiny_spec)


@pytest.fixture()
def fast_config():
    return ExperimentConfig(
        align_steps=300,
        refine_steps=60,
        gan_steps=40,
        n_critic=2,
        classifier_steps=150,
        per_class_count=12,
        batch_size=32,
        gan_batch=32,
        classifier_batch=32,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
