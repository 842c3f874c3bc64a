"""Shared fixtures. The default PSF stack is expensive, so build it once."""

import pytest

from mitosim.config import Config
from mitosim.optics import OpticalParams, compute_psf


@pytest.fixture(scope="session")
def default_psf():
    return compute_psf(OpticalParams())


@pytest.fixture(scope="session")
def default_config():
    cfg = Config()
    cfg.validate()
    return cfg


@pytest.fixture(scope="session")
def sample_pair(default_config):
    from mitosim.dataset import generate_sample
    from mitosim.rng import STREAM_SAMPLE, stable_hash

    return [generate_sample(default_config, stable_hash(7, STREAM_SAMPLE, i))
            for i in range(2)]
