"""Pytest configuration for integration tests."""

import logging

import numpy as np
import pytest

from swformer.config.settings import reload_settings
from swformer.config.yaml_config import DegradationSpec, ModelConfig
from swformer.data.corpus import make_corpus
from swformer.tensor.core import get_default_dtype, set_default_dtype


@pytest.fixture(autouse=True)
def setup_test_environment(monkeypatch):
    """Setup test environment variables."""
    monkeypatch.setenv("SWFORMER_LOG_LEVEL", "WARNING")
    monkeypatch.setenv("SWFORMER_PRECISION", "float32")
    monkeypatch.setenv("SWFORMER_WORKERS", "1")
    reload_settings()
    previous = get_default_dtype()
    yield
    set_default_dtype(previous)
    reload_settings()


@pytest.fixture(autouse=True)
def restore_root_logger():
    """The CLI reconfigures the root logger; put pytest's handlers back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
        if handler not in handlers:
            handler.close()
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


@pytest.fixture
def temp_dir(tmp_path):
    """Create a temporary directory for test files."""
    return tmp_path


@pytest.fixture
def tiny_config():
    """Smallest network shape: C=8, one block per stage."""
    return ModelConfig.preset("tiny")


@pytest.fixture
def rain_pairs():
    """Eight 32x32 synthetic rain pairs."""
    return make_corpus(8, 32, [DegradationSpec(kind="rain_streaks")], seed=7)


@pytest.fixture
def rng():
    """Seeded generator for random test inputs."""
    return np.random.default_rng(99)
