# -*- coding: utf-8 -*-

import json
import math
import os

import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook
from sklearn.metrics import roc_auc_score

from src.modules.Dataset.Dataset import CHANNELS
from src.modules.Evaluation.Evaluation import REPORT_COLUMNS, EvalReport, reconstruct_record, run_occlusion_grid, write_report
from src.modules.Evaluation.ev_ablation import ABLATIONS, log_directional_claims, resolve_ablations, run_ablation_grid
from src.modules.Evaluation.ev_baselines import baseline_impute, impute_batch
from src.modules.Evaluation.ev_inference import EvalFlags, prepare_windows
from src.modules.Evaluation.ev_metrics import accuracy, ade, auc, classification_metrics, confusion_counts, f1
from src.modules.Evaluation.ev_plots import check_steps, default_steps, mean_diagonal_distance, plot_denoise_scatter, plot_masks
from src.modules.Training.Training import TrainConfig
from src.utils.utils_errors import ArgumentError, UndefinedMetricError


# ============================ METRICS ============================ #
def test_confusion_counts_match_brute_force():
    gen = np.random.default_rng(0)
    preds = gen.integers(0, 2, 200)
    labels = gen.integers(0, 2, 200)
    c = confusion_counts(preds, labels)
    assert c["tp"] == sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
    assert c["fn"] == sum(1 for p, y in zip(preds, labels) if p == 0 and y == 1)
    assert sum(c.values()) == 200
    assert accuracy(preds, labels) == pytest.approx(np.mean(preds == labels))


def test_f1_examples():
    assert f1([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)
    assert f1([0, 0, 0], [1, 1, 0]) == 0.0
    assert f1([1, 1], [1, 1]) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_auc_matches_reference_implementation(seed):
    gen = np.random.default_rng(seed)
    labels = gen.integers(0, 2, 300)
    labels[:2] = [0, 1]
    scores = np.round(gen.random(300) + 0.3 * labels, 2)  # rounding creates ties
    assert auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)


def _pairwise_concordance(scores, labels):
    wins = 0.0
    pairs = 0
    for s_pos, y_pos in zip(scores, labels):
        if y_pos != 1:
            continue
        for s_neg, y_neg in zip(scores, labels):
            if y_neg != 0:
                continue
            pairs += 1
            wins += 1.0 if s_pos > s_neg else 0.5 if s_pos == s_neg else 0.0
    return wins / pairs


@pytest.mark.parametrize("seed", range(20))
def test_auc_matches_pairwise_concordance(seed):
    gen = np.random.default_rng(100 + seed)
    n = int(gen.integers(4, 60))
    labels = gen.integers(0, 2, n)
    labels[:2] = [1, 0]
    scores = np.round(gen.random(n), 1)
    assert auc(scores, labels) == pytest.approx(_pairwise_concordance(scores.tolist(), labels.tolist()), abs=1e-12)


@pytest.mark.parametrize("transform", [np.exp, lambda s: s ** 3 + 5.0, lambda s: 10.0 * s - 2.0])
def test_auc_is_invariant_to_monotone_transforms(transform):
    gen = np.random.default_rng(8)
    labels = gen.integers(0, 2, 80)
    labels[:2] = [0, 1]
    scores = np.round(gen.random(80) + 0.2 * labels, 2)
    assert auc(transform(scores), labels) == pytest.approx(auc(scores, labels), abs=1e-12)


def test_auc_extremes():
    assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc([0.1, 0.2, 0.9, 0.8], [1, 1, 0, 0]) == 0.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5


def test_auc_single_class_is_undefined():
    with pytest.raises(UndefinedMetricError):
        auc([0.2, 0.7], [1, 1])
    assert math.isnan(classification_metrics([0.2, 0.7], [1, 1])["auc"])


@pytest.mark.parametrize("preds, labels", [([], []), ([1, 0], [1])])
def test_metric_inputs_are_checked(preds, labels):
    with pytest.raises(ArgumentError):
        accuracy(preds, labels)


def test_classification_threshold_is_inclusive():
    row = classification_metrics([0.5, 0.4], [1, 0], threshold=0.5)
    assert row["acc"] == 1.0 and row["f1"] == 1.0


def test_ade_center_and_bbox():
    truth = np.zeros((2, 15, 7))
    pred = truth.copy()
    pred[..., 4] += 3.0
    pred[..., 5] += 4.0
    assert ade(pred, truth, "center") == pytest.approx(5.0)
    pred = truth.copy()
    pred[..., 0:2] = [3.0, 4.0]      # top-left off by 5
    pred[..., 2:4] = [6.0, 8.0]      # bottom-right off by 10
    assert ade(pred, truth, "bbox") == pytest.approx(7.5)


def test_ade_rejects_bad_input():
    with pytest.raises(ArgumentError):
        ade(np.zeros((15, 7)), np.zeros((14, 7)))
    with pytest.raises(ArgumentError):
        ade(np.zeros((15, 7)), np.zeros((15, 7)), "speed")


# ============================ BASELINES ============================ #
def _ramp():
    return np.tile(np.arange(15, dtype=float)[:, None], (1, 7)) * 2.0


def test_linear_baseline_recovers_a_ramp_inside_the_window():
    obs = _ramp()
    frames = np.zeros(15, dtype=bool)
    frames[4:9] = True
    np.testing.assert_allclose(baseline_impute(obs, frames, "linear"), obs)


def test_linear_baseline_is_flat_beyond_the_ends():
    obs = _ramp()
    frames = np.zeros(15, dtype=bool)
    frames[:3] = True
    out = baseline_impute(obs, frames, "linear")
    np.testing.assert_array_equal(out[:3], np.repeat(obs[3:4], 3, axis=0))


def test_mean_and_hold_last_baselines():
    obs = _ramp()
    frames = np.zeros(15, dtype=bool)
    frames[[0, 7]] = True
    mean = baseline_impute(obs, frames, "mean")
    np.testing.assert_allclose(mean[7], obs[~frames].mean(axis=0))
    held = baseline_impute(obs, frames, "hold_last")
    np.testing.assert_array_equal(held[7], obs[6])
    np.testing.assert_array_equal(held[0], obs[1])


def test_baseline_without_occlusion_is_identity():
    obs = _ramp()
    np.testing.assert_array_equal(baseline_impute(obs, np.zeros(15, dtype=bool), "mean"), obs)


@pytest.mark.parametrize("frames, kind", [(np.ones(15, dtype=bool), "mean"), (np.zeros(15, dtype=bool), "spline")])
def test_baseline_errors(frames, kind):
    with pytest.raises(ArgumentError):
        baseline_impute(_ramp(), frames, kind)


def test_impute_batch_stacks_windows():
    obs = np.stack([_ramp(), _ramp() + 1])
    masks = np.zeros((2, 15), dtype=bool)
    masks[:, 5] = True
    assert impute_batch(obs, masks, "linear").shape == (2, 15, 7)


# ============================ WINDOWS ============================ #
def test_prepared_windows_are_reproducible(synthetic_manifest):
    records = synthetic_manifest.subset("test")
    a = prepare_windows(records, synthetic_manifest.stats, "PO", 4, seed=1, noise_std=2.5)
    b = prepare_windows(records, synthetic_manifest.stats, "PO", 4, seed=1, noise_std=2.5)
    np.testing.assert_array_equal(a.masks, b.masks)
    np.testing.assert_array_equal(a.observed_raw, b.observed_raw)
    assert np.all(a.masks.sum(axis=1) == 4)
    assert not np.array_equal(a.observed_raw, a.truth_raw)


def test_eval_flags_validation():
    with pytest.raises(ArgumentError):
        EvalFlags(threshold=1.5).validate()
    with pytest.raises(ArgumentError):
        EvalFlags(noise_std=-0.1).validate()


# ============================ OCCLUSION GRID ============================ #
def test_grid_has_one_cell_per_pattern_and_length(trained_bundle, synthetic_manifest):
    report = run_occlusion_grid(trained_bundle, synthetic_manifest.subset("test"), ["EO", "PO"], [1, 2, 3, 4, 5])
    assert len(report) == 10
    df = report.to_frame()
    assert list(df.columns) == REPORT_COLUMNS
    assert list(zip(df["pattern"], df["length"]))[:3] == [("EO", 1), ("EO", 2), ("EO", 3)]
    assert df["acc"].between(0, 1).all() and df["f1"].between(0, 1).all()
    assert (df["n"] == len(synthetic_manifest.subset("test"))).all()
    assert (df["ade_center"] >= 0).all()


def test_grid_is_deterministic(trained_bundle, synthetic_manifest):
    records = synthetic_manifest.subset("test")
    a = run_occlusion_grid(trained_bundle, records, ["PO"], [3], seed=4).to_frame()
    b = run_occlusion_grid(trained_bundle, records, ["PO"], [3], seed=4).to_frame()
    pd.testing.assert_frame_equal(a, b)


def test_no_occlusion_pins_the_reconstruction(trained_bundle, synthetic_manifest):
    report = run_occlusion_grid(trained_bundle, synthetic_manifest.subset("test"), ["EO"], [0])
    (cell,) = report.cells
    assert cell["ade_center"] < 1e-2
    assert cell["ade_center_mean"] == 0.0


def test_grid_rejects_bad_requests(trained_bundle, synthetic_manifest):
    records = synthetic_manifest.subset("test")
    with pytest.raises(ArgumentError):
        run_occlusion_grid(trained_bundle, records, [], [1])
    with pytest.raises(ArgumentError):
        run_occlusion_grid(trained_bundle, records, ["XO"], [1])
    with pytest.raises(ArgumentError):
        run_occlusion_grid(trained_bundle, [], ["EO"], [1])


def test_without_diffusion_the_reconstruction_ade_is_missing(trained_bundle, synthetic_manifest):
    flags = EvalFlags(use_diffusion=False)
    (cell,) = run_occlusion_grid(trained_bundle, synthetic_manifest.subset("test"), ["EO"], [2], flags).cells
    assert math.isnan(cell["ade_center"]) and not math.isnan(cell["ade_center_linear"])
    assert cell["use_diffusion"] is False


def test_report_files(trained_bundle, synthetic_manifest, tmp_path):
    report = run_occlusion_grid(trained_bundle, synthetic_manifest.subset("test"), ["EO"], [1, 2])
    paths = write_report(report, str(tmp_path), stem="grid")
    assert set(paths) == {"csv", "json", "xlsx"}
    assert len(pd.read_csv(paths["csv"])) == 2
    rows = json.loads((tmp_path / "grid.json").read_text(encoding="utf-8"))
    assert [r["length"] for r in rows] == [1, 2]
    book = load_workbook(paths["xlsx"])
    assert book.sheetnames == ["Summary", "Cells"]
    summary = book["Summary"]
    assert summary.freeze_panes == "A2"
    assert summary["A1"].font.bold
    assert summary.auto_filter.ref.startswith("A1:")
    assert "EO" in report.format_table()


def test_report_without_excel(tmp_path):
    paths = write_report(EvalReport(), str(tmp_path), excel=False)
    assert set(paths) == {"csv", "json"}
    assert list(pd.read_csv(paths["csv"]).columns) == REPORT_COLUMNS
    assert EvalReport().format_table() == "(empty report)"


# ============================ SINGLE RECORD ============================ #
def test_reconstruct_record_dump(trained_bundle, synthetic_manifest):
    record = synthetic_manifest.subset("test")[0]
    df = reconstruct_record(trained_bundle, record, "EO", 3)
    assert len(df) == 15 and int(df["occluded"].sum()) == 3
    for prefix in ("truth", "obs", "rec", "mean", "linear", "hold_last"):
        assert all(f"{prefix}_{c}" in df.columns for c in CHANNELS)
    hidden = df["occluded"] == 1
    assert df.loc[hidden, "obs_x_c"].isna().all() and df.loc[~hidden, "obs_x_c"].notna().all()
    assert 0.0 <= df.attrs["p_cross"] <= 1.0
    assert df.attrs["label"] == record.label
    observed = ~hidden
    np.testing.assert_allclose(df.loc[observed, "rec_x_c"], df.loc[observed, "truth_x_c"], atol=0.05)


# ============================ PLOTS ============================ #
def test_default_denoise_steps():
    assert default_steps(100) == [100, 75, 50, 25, 0]
    assert default_steps(2) == [2, 1, 0]


def test_steps_outside_the_chain():
    with pytest.raises(ArgumentError):
        check_steps([5, 101], 100)
    with pytest.raises(ArgumentError):
        check_steps([], 100)


def test_diagonal_distance():
    assert mean_diagonal_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mean_diagonal_distance([2.0], [0.0]) == pytest.approx(math.sqrt(2.0))


def test_denoise_scatter_figures(trained_bundle, synthetic_manifest, tmp_path):
    record = synthetic_manifest.subset("test")[0]
    paths, distances = plot_denoise_scatter(trained_bundle, record, str(tmp_path), steps=[8, 0])
    assert [os.path.basename(p) for p in paths] == ["denoise_k008.png", "denoise_k000.png"]
    assert all(os.path.getsize(p) > 0 for p in paths)
    assert sorted(distances) == [0, 8] and all(d >= 0 for d in distances.values())


def test_mask_figures(synthetic_manifest, tmp_path):
    paths = plot_masks(synthetic_manifest.records[0], str(tmp_path), length=4, noise_std=2.5)
    names = sorted(os.path.basename(p) for p in paths)
    assert names == ["masks_m4.png", "path_EO4.png", "path_PO4.png"]


# ============================ ABLATIONS ============================ #
def test_ablation_registry():
    assert "no_diffusion_mask" in ABLATIONS and "fusion_average" in ABLATIONS
    assert {f"steps_{K}" for K in (25, 50, 100, 200)} <= set(ABLATIONS)
    assert {f"noise_{s:g}" for s in (0, 1, 2.5, 5, 10)} <= set(ABLATIONS)
    assert len(resolve_ablations(None)) == len(ABLATIONS)
    with pytest.raises(ArgumentError):
        resolve_ablations(["warp_drive"])


def test_directional_claims_are_logged_not_enforced():
    report = EvalReport(cells=[
        {"ablation": "base", "f1": 0.4, "ade_center": 3.0},
        {"ablation": "fusion_average", "f1": 0.6, "ade_center": 3.0},
    ])
    (line,) = log_directional_claims(report)
    assert "does not hold" in line


def test_ablation_cells_are_labelled(trained_bundle, synthetic_manifest, tmp_path, tiny_denoiser_config,
                                     tiny_intention_config):
    cfg = TrainConfig(epochs=1, K=4, batch=32, lengths=(2,), device="cpu")
    names = ["no_diffusion_mask", "noise_2.5", "fusion_average", "no_diffusion", "inputs_V"]
    report = run_ablation_grid(synthetic_manifest, str(tmp_path), names, cfg, tiny_denoiser_config,
                               tiny_intention_config, base=trained_bundle, pattern="EO", length=2)
    df = report.to_frame()
    assert list(df["ablation"]) == ["base"] + names
    assert (tmp_path / "fusion_average" / "checkpoint_best.pt").is_file()
    assert not (tmp_path / "no_diffusion_mask").exists()
    by_name = df.set_index("ablation")
    assert by_name.loc["noise_2.5", "noise_std"] == 2.5
    assert math.isnan(by_name.loc["inputs_V", "ade_center"])
