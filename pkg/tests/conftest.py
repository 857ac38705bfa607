"""
Test configuration module.

This module provides the --runslow option for the desk-scale acceptance recipes
and fixtures for a tiny synthetic task, its datasets and a quickly trained model.
"""

import pytest

from models import Provenance
from schemas import ModelSpec, TaskSpec, TrainConfig
from services import DataService, TrainingService


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the desk-scale acceptance recipes")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance recipe, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def tiny_task():
    """
    Four classes of 8x8 single-channel images.
    """
    return TaskSpec(k=4, image_shape=(1, 8, 8), sigma=0.1, ambiguity=0.3)


@pytest.fixture(scope="session")
def tiny_spec(tiny_task):
    return ModelSpec(arch="mlp-s", input_shape=tiny_task.image_shape, k=tiny_task.k)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TrainConfig(epochs=4, batch_size=32, lr=0.05, seed=3)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_task):
    return DataService.gen_synthetic(tiny_task, 400, seed=1)


@pytest.fixture(scope="session")
def tiny_test_dataset(tiny_task):
    return DataService.gen_synthetic(tiny_task, 200, seed=2)


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset, tiny_spec, tiny_cfg, tiny_test_dataset):
    """
    An mlp-s source trained for a few epochs on the tiny task.
    """
    return TrainingService.train(tiny_dataset, tiny_spec, tiny_cfg, seed=11, eval_ds=tiny_test_dataset,
                                 provenance=Provenance.SOURCE, model_id="source")


@pytest.fixture(scope="session")
def tiny_cnn(tiny_dataset, tiny_task, tiny_cfg):
    spec = ModelSpec(arch="cnn-s", input_shape=tiny_task.image_shape, k=tiny_task.k)
    return TrainingService.train(tiny_dataset, spec, tiny_cfg, seed=12, model_id="cnn")
