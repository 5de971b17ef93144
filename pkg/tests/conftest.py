import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from semlink.config import RunConfig
from semlink.featuremaps import synth_dataset
from semlink.importance import train_head

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def default_cfg():
    return RunConfig().validate()


@pytest.fixture(scope="session")
def dataset7(default_cfg):
    """Default-size dataset at full skew, seed 7 (shared across tests)."""
    cfg = default_cfg
    return synth_dataset(cfg.n_items, cfg.n_maps, cfg.map_shape,
                         cfg.n_classes, 1.0, seed=7)


@pytest.fixture(scope="session")
def head7(dataset7):
    return train_head(dataset7, epochs=200, lr=0.1, seed=7)
