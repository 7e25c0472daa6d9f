import logging
import os
from pathlib import Path

import pytest

from lsoftmax import logger_quick_setup
from lsoftmax.data.mnist import mnist_available
from lsoftmax.models.config import DATA_DIR_ENV, load_config

# Point LSOFTMAX_DATA_DIR at a directory holding the four MNIST files:
# lsoftmax fetch mnist data/mnist
MNIST_DIR = os.getenv(DATA_DIR_ENV)
CONFIG_DIR = Path(__file__).parents[2] / "configs"

# Run pytest with '-s' to view logging output
logger_quick_setup(logging.INFO)


def pytest_collection_modifyitems(config, items):
    if mnist_available(MNIST_DIR):
        return
    skip = pytest.mark.skip(reason=f"{DATA_DIR_ENV} does not point at the MNIST files")
    for item in items:
        if "mnist" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def experiment(tmp_path):
    """Load a shipped config with the data directory taken from the environment and the
    output redirected to ``tmp_path``.
    """

    def load(name: str, **section_updates):
        config = load_config(CONFIG_DIR / name)
        updates = {"output": config.output.model_copy(update={"directory": str(tmp_path)})}
        for section, values in section_updates.items():
            updates[section] = getattr(config, section).model_copy(update=values)
        return config.model_copy(update=updates)

    return load
