# -*- coding: utf-8 -*-

"""
Joint training of the denoiser and the intention head.

Per batch: k ~ U{1..K} and eps ~ N(0, I) per sample, x_k = forward_sample(x0),
eps_hat = denoiser(x_k, X_obs, M, k). The intention head sees the one-step
estimate x0_hat on occluded frames only (surrogate="composed", the default) or on
every frame (surrogate="direct"); observed frames of "composed" come from X_obs.
Loss is mean(L_simp + lambda * L_int) with the global gradient norm clipped.
"""

import math
import os
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from src.modules.Dataset.Dataset import OBS_WINDOW, DatasetManifest, normalize, observation_window
from src.modules.Denoiser.Denoiser import DenoiserConfig, DenoiserModel, input_channel_mask
from src.modules.Diffusion.Diffusion import NoiseSchedule, build_schedule, forward_sample, predict_x0, RECONSTRUCTION_CLAMP
from src.modules.Evaluation.ev_inference import EvalFlags, cell_metrics, prepare_windows, run_inference
from src.modules.Intention.Intention import IntentionConfig, IntentionModel, predict_intention
from src.modules.Occlusion.Occlusion import PATTERNS, add_observation_noise, gen_mask, mask_observation
from src.modules.Training.tr_checkpoint import save_checkpoint
from src.modules.Training.tr_losses import loss_intent, loss_simple, total_loss
from src.utils.utils_errors import ArgumentError, ConfigurationError, NumericalError
from src.utils.utils_infrastructure import MSG_TAGS, progress, seed_everything, select_device
from src.utils.utils_io import ensure_output_dir, pretty_path

TRAIN_PATTERNS = PATTERNS + ("mixed",)
# composed: x0_hat on occluded frames, observation elsewhere; direct: x0_hat everywhere
SURROGATES = ("composed", "direct")
METRIC_COLUMNS = ["epoch", "l_simp", "l_int", "val_acc", "val_auc", "val_f1", "val_ade_bbox", "val_ade_center"]
METRICS_FILENAME = "metrics.csv"
BEST_CHECKPOINT = "checkpoint_best.pt"
LAST_CHECKPOINT = "checkpoint_last.pt"


# ============================ CONFIG ============================ #
@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch: int = 64
    lam: float = 1.2
    epochs: int = 50
    grad_clip: float = 1.0
    seed: int = 1
    K: int = 100
    schedule: str = "cosine"
    pattern: str = "EO"
    lengths: Tuple[int, ...] = (1, 2, 3, 4, 5)
    ratios: Tuple[float, ...] = (0.7, 0.15, 0.15)
    noise_std: float = 0.0
    use_diffusion: bool = True
    surrogate: str = "composed"
    val_pattern: str = "EO"
    val_length: int = 3
    device: str = "auto"
    single_thread: bool = True

    def validate(self) -> "TrainConfig":
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ConfigurationError(f"lr must be > 0, got {self.lr}")
        if self.batch < 1:
            raise ConfigurationError(f"batch must be >= 1, got {self.batch}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.grad_clip <= 0:
            raise ConfigurationError(f"grad_clip must be > 0, got {self.grad_clip}")
        if self.K < 2:
            raise ConfigurationError(f"K must be >= 2, got {self.K}")
        self.pattern = str(self.pattern).strip().upper() if self.pattern.lower() != "mixed" else "mixed"
        if self.pattern not in TRAIN_PATTERNS:
            raise ConfigurationError(f"Unknown pattern '{self.pattern}'. Expected one of {', '.join(TRAIN_PATTERNS)}")
        self.val_pattern = str(self.val_pattern).strip().upper()
        if self.val_pattern not in PATTERNS:
            raise ConfigurationError(f"Unknown val_pattern '{self.val_pattern}'")
        self.lengths = tuple(int(m) for m in self.lengths)
        if not self.lengths or any(m < 0 or m > OBS_WINDOW - 1 for m in self.lengths):
            raise ConfigurationError(f"lengths must lie in [0, {OBS_WINDOW - 1}], got {self.lengths}")
        if not 0 <= self.val_length <= OBS_WINDOW - 1:
            raise ConfigurationError(f"val_length must lie in [0, {OBS_WINDOW - 1}], got {self.val_length}")
        if self.noise_std < 0:
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std}")
        self.surrogate = str(self.surrogate).strip().lower()
        if self.surrogate not in SURROGATES:
            raise ConfigurationError(f"Unknown surrogate '{self.surrogate}'. Expected one of {', '.join(SURROGATES)}")
        return self

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["lengths"] = list(self.lengths)
        payload["ratios"] = list(self.ratios)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in payload.items() if k in known}
        for key in ("lengths", "ratios"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values).validate()


@dataclass
class StepMetrics:
    loss: float
    l_simp: float
    l_int: float
    grad_norm: float


# ============================ TRAINER ============================ #
class Trainer:
    """
    Owns both models, the optimizer and the run folder:
      <out>/checkpoint_best.pt, <out>/checkpoint_last.pt, <out>/metrics.csv
    """

    def __init__(self, manifest: DatasetManifest, config: Optional[TrainConfig] = None, out_dir: str = "",
                 denoiser_config: Optional[DenoiserConfig] = None,
                 intention_config: Optional[IntentionConfig] = None) -> None:
        self.manifest = manifest
        self.config = (config or TrainConfig()).validate()
        self.out_dir = out_dir
        if not manifest.subset("train"):
            raise ArgumentError("manifest has no 'train' records")

        seed_everything(self.config.seed, single_thread=self.config.single_thread)
        self.device = select_device(self.config.device)
        self.schedule: NoiseSchedule = build_schedule(self.config.K, self.config.schedule)
        self.denoiser = DenoiserModel(denoiser_config).to(self.device)
        self.intention = IntentionModel(intention_config).to(self.device)
        self.keep = input_channel_mask(self.denoiser.config.inputs).to(self.device)
        self.diffuse = self.config.use_diffusion and self.denoiser.config.reconstructs

        params = list(self.denoiser.parameters()) + list(self.intention.parameters())
        self.optimizer = torch.optim.Adam(params, lr=self.config.lr)
        self.generator = torch.Generator(device=self.device)
        self.generator.manual_seed(self.config.seed)

        self.train_records = manifest.subset("train")
        self.val_records = manifest.subset("val")
        self.train_windows = np.stack([observation_window(r.to_matrix()) for r in self.train_records])
        self.train_labels = np.asarray([r.label for r in self.train_records], dtype=np.float64)
        self.history: List[Dict[str, float]] = []

    # ---------------- one optimizer step ----------------
    def train_step(self, x0: torch.Tensor, mask_frames: torch.Tensor, labels: torch.Tensor,
                   batch_ids: Sequence[str] = ()) -> StepMetrics:
        """x0: normalized windows [B, T, 7]; mask_frames [B, T] bool; labels [B]."""
        self.denoiser.train()
        self.intention.train()
        x0 = x0 * self.keep
        B = x0.shape[0]

        if self.diffuse:
            k = torch.randint(1, self.schedule.K + 1, (B,), generator=self.generator, device=x0.device)
            eps = torch.randn(x0.shape, generator=self.generator, dtype=x0.dtype, device=x0.device) * self.keep
            x_k = forward_sample(x0, k, eps, self.schedule)
            eps_hat = self.denoiser(x_k, x0, mask_frames, k)
            l_simp = loss_simple(eps, eps_hat, reduction="none")
            x0_hat = predict_x0(x_k, eps_hat, k, self.schedule).clamp(-RECONSTRUCTION_CLAMP, RECONSTRUCTION_CLAMP)
            if self.config.surrogate == "direct":
                surrogate = x0_hat * self.keep
            else:
                surrogate = torch.where(mask_frames.unsqueeze(-1), x0_hat, x0) * self.keep
        else:
            k = None
            l_simp = torch.zeros(B, dtype=x0.dtype, device=x0.device)
            surrogate = mask_observation(x0, mask_frames)

        p_cross = predict_intention(surrogate, self.intention)
        l_int = loss_intent(labels, p_cross, reduction="none")
        loss = total_loss(l_simp, l_int, self.config.lam).mean()
        if not torch.isfinite(loss):
            step = int(k.max()) if k is not None else None
            raise NumericalError("non-finite training loss", step=step, batch_ids=batch_ids)

        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        params = [p for group in self.optimizer.param_groups for p in group["params"]]
        grad_norm = torch.nn.utils.clip_grad_norm_(params, self.config.grad_clip)
        self.optimizer.step()
        return StepMetrics(float(loss), float(l_simp.mean()), float(l_int.mean()), float(grad_norm))

    # ---------------- epoch helpers ----------------
    def _epoch_batches(self, epoch: int):
        """Fresh masks (and observation noise) for every record, then a seeded shuffle."""
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, epoch])
        T = self.train_windows.shape[1]
        frames = np.zeros((len(self.train_records), T), dtype=bool)
        for i in range(len(self.train_records)):
            pattern = cfg.pattern if cfg.pattern != "mixed" else PATTERNS[int(rng.integers(0, len(PATTERNS)))]
            m = int(cfg.lengths[int(rng.integers(0, len(cfg.lengths)))])
            frames[i] = gen_mask(pattern, T, m, rng).frames
        windows = self.train_windows
        if cfg.noise_std > 0:
            windows = np.stack([add_observation_noise(w, cfg.noise_std, rng) for w in windows])
        x0 = normalize(windows, self.manifest.stats)

        order = rng.permutation(len(self.train_records))
        for start in range(0, len(order), cfg.batch):
            idx = order[start:start + cfg.batch]
            yield (
                torch.as_tensor(x0[idx], dtype=torch.float32, device=self.device),
                torch.as_tensor(frames[idx], dtype=torch.bool, device=self.device),
                torch.as_tensor(self.train_labels[idx], dtype=torch.float32, device=self.device),
                [self.train_records[int(i)].id for i in idx],
            )

    def train_epoch(self, epoch: int) -> Dict[str, float]:
        n_batches = math.ceil(len(self.train_records) / self.config.batch)
        sums = {"l_simp": 0.0, "l_int": 0.0}
        count = 0
        bar = progress(self._epoch_batches(epoch), desc=f"epoch {epoch}", total=n_batches)
        for x0, frames, labels, ids in bar:
            step = self.train_step(x0, frames, labels, ids)
            weight = x0.shape[0]
            sums["l_simp"] += step.l_simp * weight
            sums["l_int"] += step.l_int * weight
            count += weight
        return {k: v / max(count, 1) for k, v in sums.items()}

    def validate(self, epoch: int) -> Dict[str, float]:
        """Full reverse chain on the val split with seeded evaluation masks."""
        nan = float("nan")
        empty = {"val_acc": nan, "val_auc": nan, "val_f1": nan, "val_ade_bbox": nan, "val_ade_center": nan}
        if not self.val_records:
            return empty
        cfg = self.config
        windows = prepare_windows(self.val_records, self.manifest.stats, cfg.val_pattern, cfg.val_length, cfg.seed,
                                  noise_std=cfg.noise_std)
        generator = torch.Generator(device=self.device)
        generator.manual_seed(cfg.seed * 1000 + epoch)
        flags = EvalFlags(use_diffusion=cfg.use_diffusion, noise_std=cfg.noise_std, batch=cfg.batch)
        output = run_inference(self.denoiser, self.intention, self.schedule, windows, flags, generator,
                               self.device, desc=f"val {epoch}")
        row = cell_metrics(windows, output, self.manifest.stats, self.denoiser.config.inputs)
        return {f"val_{k}": row[k] for k in ("acc", "auc", "f1", "ade_bbox", "ade_center")}

    def _write_metrics(self) -> str:
        path = os.path.join(self.out_dir, METRICS_FILENAME)
        pd.DataFrame(self.history, columns=METRIC_COLUMNS).to_csv(path, index=False, float_format="%.6f")
        return path

    def _save(self, name: str, epoch: int, val_metrics: Dict[str, float]) -> str:
        return save_checkpoint(
            os.path.join(self.out_dir, name),
            self.denoiser, self.intention, self.schedule, self.manifest.stats, self.manifest.splits,
            self.config.to_dict(), epoch, val_metrics,
        )

    # ---------------- main loop ----------------
    def run(self) -> str:
        """Train for config.epochs; returns the best-val-F1 checkpoint path."""
        cfg = self.config
        ensure_output_dir(self.out_dir)
        print(f"[Training] {MSG_TAGS['INFO']}{len(self.train_records)} train / {len(self.val_records)} val records; "
              f"device={self.device}; schedule {self.schedule.describe()}")
        if not self.diffuse:
            print(f"[Training] {MSG_TAGS['INFO']}diffusion branch disabled; intention head trained on masked observations")

        best_path = self._save(BEST_CHECKPOINT, 0, {})
        self._save(LAST_CHECKPOINT, 0, {})
        self._write_metrics()
        best_f1 = -math.inf

        for epoch in range(1, cfg.epochs + 1):
            losses = self.train_epoch(epoch)
            val = self.validate(epoch)
            row = {"epoch": epoch, **losses, **val}
            self.history.append(row)
            self._write_metrics()
            self._save(LAST_CHECKPOINT, epoch, val)

            f1_value = val["val_f1"] if not math.isnan(val["val_f1"]) else -math.inf
            if f1_value > best_f1 or epoch == 1:
                best_f1 = max(best_f1, f1_value)
                best_path = self._save(BEST_CHECKPOINT, epoch, val)
            print(f"[Training] {MSG_TAGS['INFO']}epoch {epoch}/{cfg.epochs} l_simp={losses['l_simp']:.4f} "
                  f"l_int={losses['l_int']:.4f} val_acc={val['val_acc']:.4f} val_f1={val['val_f1']:.4f} "
                  f"val_ade_center={val['val_ade_center']:.2f}px")

        print(f"[Training] {MSG_TAGS['INFO']}metrics written to '{pretty_path(os.path.join(self.out_dir, METRICS_FILENAME))}'")
        return best_path


def fit(manifest: DatasetManifest, config: Optional[TrainConfig] = None, out_dir: str = "",
        denoiser_config: Optional[DenoiserConfig] = None, intention_config: Optional[IntentionConfig] = None) -> str:
    return Trainer(manifest, config, out_dir, denoiser_config, intention_config).run()
