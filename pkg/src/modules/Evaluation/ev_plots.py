# -*- coding: utf-8 -*-

"""Diagnostic figures: denoising scatter per reverse step and occlusion-mask views."""

import os
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
import torch

from src.modules.Dataset.Dataset import CENTER_SLICE, X_CHANNELS, Y_CHANNELS, NormalizationStats, TrajectoryRecord, denormalize
from src.modules.Diffusion.Diffusion import reconstruct
from src.modules.Denoiser.Denoiser import input_channel_mask
from src.modules.Evaluation.ev_inference import prepare_windows
from src.modules.Occlusion.Occlusion import PATTERNS, eval_mask_for_record
from src.modules.Training.tr_checkpoint import ModelBundle
from src.utils.utils_errors import ArgumentError
from src.utils.utils_infrastructure import MSG_TAGS
from src.utils.utils_io import ensure_output_dir, pretty_path

matplotlib.use("Agg")

DENOISE_STEP_FRACTIONS = (1.0, 0.75, 0.5, 0.25, 0.0)
FIGURE_DPI = 150


def mean_diagonal_distance(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean perpendicular distance of the points (truth, pred) to the line pred = truth."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    return float(np.mean(np.abs(pred - truth)) / np.sqrt(2.0))


def default_steps(K: int) -> List[int]:
    """K, 3K/4, K/2, K/4 and 0 (rounded, duplicates dropped)."""
    steps: List[int] = []
    for fraction in DENOISE_STEP_FRACTIONS:
        k = int(round(fraction * K))
        if k not in steps:
            steps.append(k)
    return steps


def check_steps(steps: Sequence[int], K: int) -> List[int]:
    steps = [int(s) for s in steps]
    if not steps:
        raise ArgumentError("at least one diffusion step is required")
    bad = [s for s in steps if s < 0 or s > K]
    if bad:
        raise ArgumentError(f"steps must lie in [0, {K}], got {bad}")
    return steps


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_denoise_scatter(bundle: ModelBundle, record: TrajectoryRecord, out_dir: str,
                         steps: Optional[Sequence[int]] = None, pattern: str = "EO", length: int = 3,
                         seed: int = 1, device=None) -> Tuple[List[str], Dict[int, float]]:
    """
    One figure per step k with X and Y panels: predicted vs ground-truth pixel
    coordinates of the intermediate state x_k. Returns (paths, {k: mean distance}).
    """
    if not bundle.denoiser.config.reconstructs:
        raise ArgumentError("this checkpoint does not reconstruct pixel channels")
    steps = check_steps(default_steps(bundle.schedule.K) if steps is None else steps, bundle.schedule.K)
    out_dir = ensure_output_dir(out_dir)
    device = device or next(bundle.denoiser.parameters()).device

    windows = prepare_windows([record], bundle.stats, pattern, length, seed)
    keep = input_channel_mask(bundle.denoiser.config.inputs).to(device)
    xo = torch.as_tensor(windows.observed[0], dtype=torch.float32, device=device) * keep
    frames = torch.as_tensor(windows.masks[0], dtype=torch.bool, device=device)
    generator = torch.Generator(device=device)
    generator.manual_seed(int(seed))
    _, states = reconstruct(xo, frames, bundle.denoiser.eval(), bundle.schedule, generator=generator, record_steps=steps)

    truth = windows.truth_raw[0]
    kept = [c for c in X_CHANNELS + Y_CHANNELS if bool(keep[c])]
    paths: List[str] = []
    distances: Dict[int, float] = {}
    for k in steps:
        pred = denormalize(states[k].cpu().numpy().astype(np.float64), bundle.stats)
        distances[k] = mean_diagonal_distance(pred[:, kept], truth[:, kept])

        fig, axes = plt.subplots(1, 2, figsize=(10, 4.5))
        for ax, channels, axis_name in ((axes[0], X_CHANNELS, "X"), (axes[1], Y_CHANNELS, "Y")):
            channels = [c for c in channels if bool(keep[c])]
            t = truth[:, channels].reshape(-1)
            p = pred[:, channels].reshape(-1)
            ax.scatter(t, p, s=12, alpha=0.7)
            lo, hi = float(min(t.min(), p.min())), float(max(t.max(), p.max()))
            ax.plot([lo, hi], [lo, hi], color="black", linewidth=1.0, linestyle="--")
            ax.set_xlabel(f"ground truth {axis_name} (px)")
            ax.set_ylabel(f"predicted {axis_name} (px)")
            ax.set_title(f"{axis_name} coordinates, k = {k}")
        fig.suptitle(f"{record.id} {pattern}{length}: mean distance to diagonal {distances[k]:.2f} px")
        paths.append(_save(fig, os.path.join(out_dir, f"denoise_k{k:03d}.png")))
        print(f"[Plots] {MSG_TAGS['INFO']}k={k}: mean distance to diagonal {distances[k]:.2f} px -> '{pretty_path(paths[-1])}'")
    return paths, distances


def plot_masks(record: TrajectoryRecord, out_dir: str, length: int = 3, seed: int = 1,
               noise_std: float = 0.0, T_obs: int = 15) -> List[str]:
    """EO and PO mask matrices for one record, and its center path with occluded frames marked."""
    out_dir = ensure_output_dir(out_dir)
    paths: List[str] = []

    fig, axes = plt.subplots(1, len(PATTERNS), figsize=(4 * len(PATTERNS), 4))
    for ax, pattern in zip(np.atleast_1d(axes), PATTERNS):
        mask = eval_mask_for_record(record.id, pattern, T_obs, length, seed)
        ax.imshow(mask.entries, cmap="Greys", aspect="auto", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(f"{pattern}{length}")
        ax.set_xlabel("feature")
        ax.set_ylabel("frame")
    paths.append(_save(fig, os.path.join(out_dir, f"masks_m{int(length)}.png")))

    for pattern in PATTERNS:
        windows = prepare_windows([record], NormalizationStats.identity(), pattern, length, seed,
                                  noise_std=noise_std, T_obs=T_obs)
        truth = windows.truth_raw[0][:, CENTER_SLICE]
        observed = windows.observed_raw[0][:, CENTER_SLICE]
        hidden = windows.masks[0]

        fig, ax = plt.subplots(figsize=(6, 4.5))
        ax.plot(truth[:, 0], truth[:, 1], color="grey", linewidth=1.0, label="ground truth")
        ax.scatter(observed[~hidden, 0], observed[~hidden, 1], s=16, label="observed")
        ax.scatter(truth[hidden, 0], truth[hidden, 1], s=28, marker="x", color="red", label="occluded")
        ax.invert_yaxis()
        ax.set_xlabel("x center (px)")
        ax.set_ylabel("y center (px)")
        ax.set_title(f"{record.id} {pattern}{length} noise std {noise_std:g} px")
        ax.legend(loc="best")
        paths.append(_save(fig, os.path.join(out_dir, f"path_{pattern}{length}.png")))

    for path in paths:
        print(f"[Plots] {MSG_TAGS['INFO']}written '{pretty_path(path)}'")
    return paths
