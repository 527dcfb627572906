import os

import hypothesis
import numpy as np
import pytest

from vinp.data.dataset import build_dataset
from vinp.enums import BnMode
from vinp.grad.tensor import Tensor, get_tape, no_grad
from vinp.nets.edgan import discriminator, generator
from vinp.nets.hybrid import HybridModel
from vinp.nets.lrcn import lrcn_forward
from vinp.train.config import TrainConfig

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run overfit and end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long training runs, enabled with --run-slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def clean_tape():
    get_tape().clear()
    yield
    get_tape().clear()


TINY = {
    "d_l": 16, "d_h": 32, "channels": (2, 2, 2), "lrcn_channels": (2, 2, 2),
    "feature_dim": 4, "hidden_dim": 4, "seed_channels": 2, "mid_channels": 2,
    "stage1a_epochs": 1, "stage1a_batch": 2, "stage1b_epochs": 1, "stage1b_batch": 2,
    "stage2_epochs": 1, "stage2_batch": 2, "stage3_epochs": 1, "stage3_batch": 2,
    "ablation_epochs": 1, "ablation_batch": 2,
    "n_samples": 5,
}


@pytest.fixture
def tiny_config():
    return TrainConfig(**TINY)


@pytest.fixture
def tiny_model(tiny_config):
    return HybridModel.init(tiny_config.edgan_config(), tiny_config.lrcn_config(), seed=1)


@pytest.fixture
def warm_model(tiny_model):
    """A tiny model whose batch-norm layers have seen one train-mode batch."""
    rng = np.random.default_rng(0)
    vols = (rng.random((2, 16, 16, 16)) < 0.3).astype(np.float32)
    with no_grad():
        generator(Tensor(vols[:, np.newaxis]), tiny_model.generator, tiny_model.edgan, BnMode.TRAIN)
        discriminator(Tensor(vols[:, np.newaxis]), tiny_model.discriminator, tiny_model.edgan, BnMode.TRAIN)
        lrcn_forward(vols, tiny_model.lrcn_params, tiny_model.lrcn, BnMode.TRAIN, steps=range(1))
    return tiny_model


@pytest.fixture
def tiny_dataset(tmp_path, tiny_config):
    return build_dataset(tmp_path / "data", 10, d_l=16, d_h=32, corruption=tiny_config.corruption_spec())
