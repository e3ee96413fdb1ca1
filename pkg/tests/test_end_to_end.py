# -*- coding: utf-8 -*-

"""Full-size runs on synthetic data. Skipped unless pytest is given --runslow."""

import math

import numpy as np
import pytest

from src.modules.Dataset.Dataset import MIN_TOTAL_FRAMES, build_manifest
from src.modules.Dataset.ds_synthetic import generate_synthetic
from src.modules.Evaluation.Evaluation import run_occlusion_grid
from src.modules.Evaluation.ev_ablation import ABLATIONS, run_ablation_grid
from src.modules.Training.Training import TrainConfig, fit
from src.modules.Training.tr_checkpoint import load_checkpoint

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def curver_manifest():
    base = generate_synthetic(512, MIN_TOTAL_FRAMES, np.random.default_rng(1), "curver")
    return build_manifest(base.records, TrainConfig().ratios, np.random.default_rng(1))


@pytest.fixture(scope="module")
def overfit_bundle(curver_manifest, tmp_path_factory):
    cfg = TrainConfig(epochs=50, K=100, seed=1)
    return load_checkpoint(fit(curver_manifest, cfg, str(tmp_path_factory.mktemp("overfit"))))


def test_overfit_on_the_training_split(overfit_bundle, curver_manifest):
    report = run_occlusion_grid(overfit_bundle, curver_manifest.subset("train"), ["EO"], [3], seed=1)
    cell = report.cells[0]
    assert cell["acc"] >= 0.95
    assert cell["auc"] >= 0.97


def test_partial_occlusion_beats_mean_imputation(overfit_bundle, curver_manifest):
    report = run_occlusion_grid(overfit_bundle, curver_manifest.subset("test"), ["PO"], [0, 3], seed=1)
    clean, po3 = report.cells
    assert clean["ade_center"] < 1e-2
    assert po3["ade_center"] < po3["ade_center_mean"]
    assert math.isfinite(po3["ade_center_linear"])


def test_every_ablation_runs_on_a_small_manifest(tmp_path, tiny_denoiser_config, tiny_intention_config):
    base = generate_synthetic(64, MIN_TOTAL_FRAMES, np.random.default_rng(2), "walker")
    manifest = build_manifest(base.records, (0.5, 0.25, 0.25), np.random.default_rng(2))
    cfg = TrainConfig(epochs=1, K=25, batch=32, device="cpu")
    report = run_ablation_grid(manifest, str(tmp_path), None, cfg, tiny_denoiser_config, tiny_intention_config,
                               pattern="EO", length=3)
    df = report.to_frame()
    assert list(df["ablation"]) == ["base"] + list(ABLATIONS)
    assert df["ablation"].is_unique
