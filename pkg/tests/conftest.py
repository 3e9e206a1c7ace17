# tests/conftest.py

import numpy as np
import pytest

from sosdetect.net.model import ModelConfig, init_weights


@pytest.fixture
def tiny_model_config():
    """Full detector geometry with a handful of channels, fast enough for unit tests."""
    return ModelConfig(
        class_count_with_background=3, stage_channels=(2, 2, 2, 2), convs_per_stage=1
    )


@pytest.fixture
def tiny_model(tiny_model_config):
    return init_weights(tiny_model_config, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Run the desk-scale end-to-end tests.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="desk-scale run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
