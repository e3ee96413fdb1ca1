# -*- coding: utf-8 -*-

"""
Window preparation and batched inference shared by validation, the
occlusion grid and the single-record tools.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from src.modules.Dataset.Dataset import OBS_WINDOW, NormalizationStats, TrajectoryRecord, denormalize, normalize, observation_window
from src.modules.Denoiser.Denoiser import DenoiserModel, input_channel_mask
from src.modules.Diffusion.Diffusion import NoiseSchedule, reconstruct
from src.modules.Evaluation.ev_baselines import BASELINE_KINDS, impute_batch
from src.modules.Evaluation.ev_metrics import ade, classification_metrics
from src.modules.Intention.Intention import IntentionModel, predict_intention
from src.modules.Occlusion.Occlusion import PATTERN_CODES, add_observation_noise, eval_mask_for_record, mask_observation
from src.utils.utils_errors import ArgumentError
from src.utils.utils_infrastructure import progress

NOISE_STREAM = 7


@dataclass
class EvalFlags:
    use_diffusion_mask: bool = True
    noise_std: float = 0.0
    use_diffusion: bool = True
    threshold: float = 0.5
    batch: int = 64

    def validate(self) -> "EvalFlags":
        if self.noise_std < 0:
            raise ArgumentError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ArgumentError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.batch < 1:
            raise ArgumentError(f"batch must be >= 1, got {self.batch}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PreparedWindows:
    ids: List[str]
    truth_raw: np.ndarray       # [N, T, 7] clean, pixel space
    observed_raw: np.ndarray    # [N, T, 7] with observation noise, not masked
    truth: np.ndarray           # normalized clean
    observed: np.ndarray        # normalized observation
    masks: np.ndarray           # [N, T] bool, True = occluded
    labels: np.ndarray          # [N]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class InferenceOutput:
    probs: np.ndarray
    recon: Optional[np.ndarray]     # normalized [N, T, 7]; None when nothing is reconstructed


def prepare_windows(records: Sequence[TrajectoryRecord], stats: NormalizationStats, pattern: str, length: int,
                    seed: int, noise_std: float = 0.0, T_obs: int = OBS_WINDOW) -> PreparedWindows:
    """Observation windows of 'records' with their seeded evaluation masks and optional pixel noise."""
    pattern = str(pattern).strip().upper()
    if pattern not in PATTERN_CODES:
        raise ArgumentError(f"Unknown occlusion pattern '{pattern}'")
    noise_rng = np.random.default_rng([int(seed), PATTERN_CODES[pattern], int(length), NOISE_STREAM])

    truth_raw, observed_raw, masks = [], [], []
    for record in records:
        window = observation_window(record.to_matrix(), T_obs)
        truth_raw.append(window)
        observed_raw.append(add_observation_noise(window, noise_std, noise_rng) if noise_std > 0 else window.copy())
        masks.append(eval_mask_for_record(record.id, pattern, T_obs, length, seed).frames)

    shape = (0, T_obs, len(stats.shift))
    truth_raw_arr = np.stack(truth_raw) if truth_raw else np.zeros(shape)
    observed_raw_arr = np.stack(observed_raw) if observed_raw else np.zeros(shape)
    return PreparedWindows(
        ids=[r.id for r in records],
        truth_raw=truth_raw_arr,
        observed_raw=observed_raw_arr,
        truth=normalize(truth_raw_arr, stats),
        observed=normalize(observed_raw_arr, stats),
        masks=np.stack(masks) if masks else np.zeros((0, T_obs), dtype=bool),
        labels=np.asarray([r.label for r in records], dtype=int),
    )


@torch.no_grad()
def run_inference(denoiser: DenoiserModel, intention: IntentionModel, schedule: NoiseSchedule,
                  windows: PreparedWindows, flags: EvalFlags, generator: Optional[torch.Generator] = None,
                  device=None, desc: str = "inference") -> InferenceOutput:
    """
    Full reverse chain per batch, then the intention head on the reconstruction.
    Without diffusion (flag or velocity-only model) the head sees the masked observation.
    """
    flags.validate()
    device = device or next(denoiser.parameters()).device
    denoiser.eval()
    intention.eval()
    keep = input_channel_mask(denoiser.config.inputs).to(device)
    diffuse = flags.use_diffusion and denoiser.config.reconstructs

    probs: List[np.ndarray] = []
    recons: List[np.ndarray] = []
    starts = range(0, len(windows), flags.batch)
    for start in progress(starts, desc=desc, total=len(starts)):
        stop = start + flags.batch
        xo = torch.as_tensor(windows.observed[start:stop], dtype=torch.float32, device=device) * keep
        frames = torch.as_tensor(windows.masks[start:stop], dtype=torch.bool, device=device)
        if diffuse:
            x_in = reconstruct(xo, frames, denoiser, schedule, generator=generator,
                               use_mask=flags.use_diffusion_mask) * keep
            recons.append(x_in.cpu().numpy().astype(np.float64))
        else:
            x_in = mask_observation(xo, frames)
        probs.append(predict_intention(x_in, intention).reshape(-1).cpu().numpy().astype(np.float64))

    return InferenceOutput(
        probs=np.concatenate(probs) if probs else np.zeros(0),
        recon=(np.concatenate(recons) if recons else np.zeros((0,) + windows.observed.shape[1:])) if diffuse else None,
    )


def cell_metrics(windows: PreparedWindows, output: InferenceOutput, stats: NormalizationStats,
                 inputs: Sequence[str], threshold: float = 0.5) -> Dict[str, float]:
    """
    acc / auc / f1 plus pixel ADE of the reconstruction and of every baseline.
    ADE of a modality the model does not take as input is NaN.
    """
    nan = float("nan")
    row: Dict[str, float] = dict(classification_metrics(output.probs, windows.labels, threshold))
    columns = {"bbox": "B", "center": "C"}
    recon_px = denormalize(output.recon, stats) if output.recon is not None else None
    imputed = {kind: impute_batch(windows.observed_raw, windows.masks, kind) for kind in BASELINE_KINDS}
    for channels, modality in columns.items():
        usable = modality in inputs
        row[f"ade_{channels}"] = ade(recon_px, windows.truth_raw, channels) if usable and recon_px is not None else nan
        for kind in BASELINE_KINDS:
            row[f"ade_{channels}_{kind}"] = ade(imputed[kind], windows.truth_raw, channels)
    row["n"] = int(len(windows))
    return row
