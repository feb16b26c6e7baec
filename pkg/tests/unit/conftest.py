"""Pytest configuration and shared fixtures for unit tests."""

import numpy as np
import pytest

from swformer.config.yaml_config import ModelConfig
from swformer.tensor.core import get_default_dtype, precision, set_default_dtype


@pytest.fixture(autouse=True)
def restore_default_dtype():
    """Keep a test that changes the storage precision from leaking it."""
    previous = get_default_dtype()
    yield
    set_default_dtype(previous)


@pytest.fixture
def temp_dir(tmp_path):
    """Create a temporary directory for test files."""
    return tmp_path


@pytest.fixture
def rng():
    """Seeded generator for random test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test body with 64-bit tensors and parameters."""
    with precision("float64"):
        yield


@pytest.fixture
def tiny_config():
    """Smallest network shape: C=8, one block per stage."""
    return ModelConfig.preset("tiny")
