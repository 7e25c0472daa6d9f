import numpy as np
import pytest

from lsoftmax.data import make_blobs
from lsoftmax.models.config import loads_config

from .utils import blob_config_text


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blobs():
    return make_blobs(
        n_per_class=60, classes=3, dim=2, spread=0.4, seed=3, fractions=(0.8, 0.1, 0.1)
    )


@pytest.fixture
def blob_config(tmp_path):
    return loads_config(blob_config_text(output__directory=tmp_path / "run"), environ={})


@pytest.fixture
def blob_config_file(tmp_path):
    path = tmp_path / "blobs.ini"
    path.write_text(blob_config_text(output__directory=tmp_path / "run"))
    return path
