# -*- coding: utf-8 -*-

import json

import pandas as pd
import pytest

import src.OccludedPedestrianIntent as launcher
from src.modules.Training.Training import BEST_CHECKPOINT

TINY_MODELS = [
    "--override", "denoiser.model_dim=16", "--override", "denoiser.heads=2",
    "--override", "denoiser.encoder_layers=1", "--override", "denoiser.decoder_layers=1",
    "--override", "intention.model_dim=16", "--override", "intention.heads=2",
    "--override", "intention.layers=1",
]


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    cfg_dir = tmp_path / "cfg"
    monkeypatch.setattr(launcher, "CONFIG_DIR", cfg_dir)
    monkeypatch.setattr(launcher, "CONFIG_PATH", cfg_dir / "config.cfg")
    return cfg_dir


@pytest.fixture
def small_dataset(tmp_path):
    target = tmp_path / "data.jsonl"
    assert launcher.main(["synth", "--n", "40", "--frames", "20", "--dataset", str(target),
                          "--out", str(tmp_path / "synth")]) == 0
    return target


@pytest.fixture
def zero_epoch_run(tmp_path, small_dataset):
    out = tmp_path / "run"
    code = launcher.main(["train", "--dataset", str(small_dataset), "--epochs", "0", "--K", "8",
                          "--device", "cpu", "--out", str(out), *TINY_MODELS])
    assert code == 0
    return out


# ============================ SYNTH ============================ #
def test_synth_writes_one_line_per_episode_reproducibly(tmp_path):
    out = tmp_path / "synth"
    assert launcher.main(["synth", "--out", str(out), "--seed", "7"]) == 0
    target = out / "synthetic_walker.jsonl"
    first = target.read_bytes()
    lines = first.decode("utf-8").splitlines()
    assert len(lines) == 512
    assert {"id", "frames", "label"} <= set(json.loads(lines[0]))

    assert launcher.main(["synth", "--out", str(out), "--seed", "7"]) == 0
    assert target.read_bytes() == first


def test_synth_rejects_empty_dataset(tmp_path):
    assert launcher.main(["synth", "--n", "0", "--out", str(tmp_path)]) == 2


def test_unknown_flag_is_a_usage_error(tmp_path):
    assert launcher.main(["synth", "--bogus", "--out", str(tmp_path)]) == 2


def test_unknown_override_key(tmp_path):
    assert launcher.main(["synth", "--out", str(tmp_path), "--override", "denoiser.depth=3"]) == 2
    assert launcher.main(["synth", "--out", str(tmp_path), "--override", "no_equals_sign"]) == 2


def test_run_writes_a_log_file(tmp_path):
    assert launcher.main(["synth", "--n", "4", "--out", str(tmp_path)]) == 0
    logs = list((tmp_path / "Logs").glob("*.log"))
    assert len(logs) == 1
    assert "[Synth]" in logs[0].read_text(encoding="utf-8")


# ============================ SETTINGS ============================ #
def test_precedence_override_beats_flag_beats_config(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("lr = 0.01\nbatch = 8\nlambda = 2.0\ndenoiser.heads = 4\n", encoding="utf-8")
    args = launcher.parse_args(["train", "--config", str(cfg), "--lr", "0.02", "--batch", "16",
                                "--override", "batch=32"])
    settings = launcher.resolve_settings(args)
    assert settings.train.lr == 0.02
    assert settings.train.batch == 32
    assert settings.train.lam == 2.0
    assert settings.denoiser.heads == 4


def test_eval_prefix_reaches_eval_flags():
    args = launcher.parse_args(["eval", "--override", "eval.noise_std=2.5", "--no-diffusion-mask"])
    flags = launcher.resolve_settings(args).flags
    assert flags.noise_std == 2.5 and flags.use_diffusion_mask is False


# ============================ TRAIN / EVAL ============================ #
def test_train_remembers_dataset_and_checkpoint(zero_epoch_run, small_dataset, isolated_config):
    assert (zero_epoch_run / BEST_CHECKPOINT).is_file()
    saved = (isolated_config / "config.cfg").read_text(encoding="utf-8")
    assert str(small_dataset) in saved
    assert BEST_CHECKPOINT in saved


def test_eval_uses_remembered_checkpoint(zero_epoch_run):
    code = launcher.main(["eval", "--patterns", "EO", "--lengths", "1", "--no-excel", "--device", "cpu",
                          "--stem", "grid"])
    assert code == 0
    report = pd.read_csv(zero_epoch_run / "grid.csv")
    assert len(report) == 1
    assert report.loc[0, "pattern"] == "EO" and report.loc[0, "length"] == 1


def test_eval_without_any_checkpoint(tmp_path, small_dataset):
    code = launcher.main(["eval", "--dataset", str(small_dataset), "--out", str(tmp_path / "ev")])
    assert code == 2


def test_missing_checkpoint_file_is_an_io_error(tmp_path, small_dataset):
    code = launcher.main(["eval", "--dataset", str(small_dataset), "--checkpoint", str(tmp_path / "none.pt"),
                          "--out", str(tmp_path / "ev")])
    assert code == 3


def test_reconstruct_unknown_record(zero_epoch_run):
    assert launcher.main(["reconstruct", "--record", "no-such-record"]) == 2


def test_reconstruct_writes_per_frame_csv(zero_epoch_run, small_dataset):
    record_id = json.loads(small_dataset.read_text(encoding="utf-8").splitlines()[0])["id"]
    assert launcher.main(["reconstruct", "--record", record_id, "--length", "2"]) == 0
    dumps = list(zero_epoch_run.glob("reconstruct_*_EO2.csv"))
    assert len(dumps) == 1
    assert len(pd.read_csv(dumps[0])) == 15
