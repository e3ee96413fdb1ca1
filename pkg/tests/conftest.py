# -*- coding: utf-8 -*-

import numpy as np
import pytest
import torch

from src.modules.Dataset.Dataset import build_manifest
from src.modules.Dataset.ds_synthetic import generate_synthetic
from src.modules.Denoiser.Denoiser import DenoiserConfig
from src.modules.Intention.Intention import IntentionConfig
from src.modules.Training.Training import TrainConfig, fit
from src.modules.Training.tr_checkpoint import load_checkpoint


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked as slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ============================ SHARED FIXTURES ============================ #
@pytest.fixture
def rng():
    return np.random.default_rng(1)


@pytest.fixture
def tiny_denoiser_config():
    return DenoiserConfig(model_dim=16, heads=2, encoder_layers=1, decoder_layers=1, dropout=0.0)


@pytest.fixture
def tiny_intention_config():
    return IntentionConfig(layers=1, heads=2, model_dim=16, dropout=0.0)


@pytest.fixture(scope="session")
def synthetic_manifest():
    base = generate_synthetic(40, 20, np.random.default_rng(3), "walker")
    return build_manifest(base.records, (0.6, 0.2, 0.2), np.random.default_rng(3))


@pytest.fixture(scope="session")
def tiny_train_config():
    return TrainConfig(epochs=1, K=8, batch=16, lr=1e-3, seed=1, lengths=(1, 2, 3), val_length=2, device="cpu")


@pytest.fixture(scope="session")
def trained_bundle(tmp_path_factory, synthetic_manifest, tiny_train_config):
    """One epoch on a 40-record manifest with the smallest models; enough for plumbing checks."""
    out_dir = tmp_path_factory.mktemp("trained")
    path = fit(
        synthetic_manifest,
        tiny_train_config,
        str(out_dir),
        DenoiserConfig(model_dim=16, heads=2, encoder_layers=1, decoder_layers=1, dropout=0.0),
        IntentionConfig(layers=1, heads=2, model_dim=16, dropout=0.0),
    )
    return load_checkpoint(path, device=torch.device("cpu"))
