# -*- coding: utf-8 -*-

import numpy as np

from src.utils.utils_errors import ArgumentError

BASELINE_KINDS = ("mean", "linear", "hold_last")


def baseline_impute(obs: np.ndarray, mask_frames: np.ndarray, kind: str = "linear") -> np.ndarray:
    """
    Fill occluded frames of obs [T, D] (mask_frames True = occluded):
      mean       per-channel mean of the observed frames
      linear     interpolation between the nearest observed frames, flat beyond the ends
      hold_last  last observed frame; leading gaps take the first observed frame
    """
    obs = np.asarray(obs, dtype=np.float64)
    frames = np.asarray(mask_frames, dtype=bool).reshape(-1)
    if obs.ndim != 2 or frames.shape[0] != obs.shape[0]:
        raise ArgumentError(f"baseline_impute: mask of {frames.shape[0]} frames for window {obs.shape}")
    if kind not in BASELINE_KINDS:
        raise ArgumentError(f"Unknown baseline '{kind}'. Expected one of {', '.join(BASELINE_KINDS)}")
    if frames.all():
        raise ArgumentError("baseline_impute needs at least one observed frame")

    out = obs.copy()
    if not frames.any():
        return out
    seen = np.nonzero(~frames)[0]
    hidden = np.nonzero(frames)[0]

    if kind == "mean":
        out[hidden] = obs[seen].mean(axis=0)
    elif kind == "linear":
        for c in range(obs.shape[1]):
            out[hidden, c] = np.interp(hidden, seen, obs[seen, c])
    else:
        for t in hidden:
            before = seen[seen < t]
            out[t] = obs[before[-1]] if before.size else obs[seen[0]]
    return out


def impute_batch(obs: np.ndarray, mask_frames: np.ndarray, kind: str) -> np.ndarray:
    """baseline_impute over [N, T, D] windows."""
    return np.stack([baseline_impute(o, m, kind) for o, m in zip(obs, mask_frames)]) if len(obs) else np.asarray(obs)
