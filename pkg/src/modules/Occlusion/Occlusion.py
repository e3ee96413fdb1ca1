# -*- coding: utf-8 -*-

"""
Frame-level occlusion masks (EO / PO), mask application and observation noise.

A mask hides whole frames: every row of the T x D matrix is either all-0
(observed) or all-1 (occluded), and at least one frame stays observed.
"""

import zlib
from dataclasses import dataclass
from typing import Union

import numpy as np
import torch

from src.modules.Dataset.Dataset import PIXEL_CHANNELS, RAW_DIM
from src.utils.utils_errors import ArgumentError

PATTERNS = ("EO", "PO")
PATTERN_CODES = {"EO": 1, "PO": 2}
FILL_MODES = ("zero", "hold_last")


@dataclass(frozen=True, eq=False)
class OcclusionMask:
    entries: np.ndarray     # [T x D] uint8, 1 = occluded
    pattern: str
    length: int

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries)
        if entries.ndim != 2:
            raise ArgumentError(f"mask entries must be a T x D matrix, got shape {entries.shape}")
        rows_on = entries.all(axis=1)
        rows_off = ~entries.any(axis=1)
        if not np.all(rows_on | rows_off):
            raise ArgumentError("mask rows must be all-0 or all-1")
        if int(rows_on.sum()) != self.length:
            raise ArgumentError(f"mask has {int(rows_on.sum())} occluded rows, expected {self.length}")
        if not rows_off.any():
            raise ArgumentError("mask must keep at least one observed frame")
        if self.pattern not in PATTERNS:
            raise ArgumentError(f"Unknown occlusion pattern '{self.pattern}'")

    @property
    def T(self) -> int:
        return int(self.entries.shape[0])

    @property
    def frames(self) -> np.ndarray:
        """Per-frame boolean vector (True = occluded)."""
        return np.asarray(self.entries).all(axis=1)

    def as_tensor(self, device=None) -> torch.Tensor:
        return torch.as_tensor(self.frames, dtype=torch.bool, device=device)


def broadcast_mask(frames, D: int = RAW_DIM) -> np.ndarray:
    """Lift a per-frame occlusion vector (length T) to a T x D uint8 matrix."""
    frames = np.asarray(frames, dtype=bool).reshape(-1)
    return np.repeat(frames[:, None], D, axis=1).astype(np.uint8)


def _check_length(T: int, m: int) -> None:
    if T < 1:
        raise ArgumentError(f"T must be >= 1, got {T}")
    if m < 0 or m > T - 1:
        raise ArgumentError(f"occlusion length m must be in [0, T-1] = [0, {T - 1}], got {m}")


def gen_eo_mask(T: int, m: int, rng: np.random.Generator, D: int = RAW_DIM) -> OcclusionMask:
    """m distinct frames drawn uniformly without replacement."""
    _check_length(T, m)
    frames = np.zeros(T, dtype=bool)
    if m:
        frames[rng.choice(T, size=m, replace=False)] = True
    return OcclusionMask(entries=broadcast_mask(frames, D), pattern="EO", length=m)


def gen_po_mask(T: int, m: int, rng: np.random.Generator, D: int = RAW_DIM) -> OcclusionMask:
    """One contiguous run of m frames with a start drawn uniformly from [0, T - m]."""
    _check_length(T, m)
    frames = np.zeros(T, dtype=bool)
    if m:
        start = int(rng.integers(0, T - m + 1))
        frames[start:start + m] = True
    return OcclusionMask(entries=broadcast_mask(frames, D), pattern="PO", length=m)


def gen_mask(pattern: str, T: int, m: int, rng: np.random.Generator, D: int = RAW_DIM) -> OcclusionMask:
    pattern = str(pattern).strip().upper()
    if pattern == "EO":
        return gen_eo_mask(T, m, rng, D)
    if pattern == "PO":
        return gen_po_mask(T, m, rng, D)
    raise ArgumentError(f"Unknown occlusion pattern '{pattern}'. Expected one of {', '.join(PATTERNS)}")


def eval_mask_for_record(record_id: str, pattern: str, T: int, m: int, seed: int, D: int = RAW_DIM) -> OcclusionMask:
    """Evaluation mask, fixed per (seed, record id, pattern, length)."""
    pattern = str(pattern).strip().upper()
    if pattern not in PATTERN_CODES:
        raise ArgumentError(f"Unknown occlusion pattern '{pattern}'. Expected one of {', '.join(PATTERNS)}")
    rng = np.random.default_rng([int(seed), zlib.crc32(record_id.encode("utf-8")), int(m), PATTERN_CODES[pattern]])
    return gen_mask(pattern, T, m, rng, D)


def _mask_frames(mask: Union[OcclusionMask, np.ndarray], T: int) -> np.ndarray:
    if isinstance(mask, OcclusionMask):
        frames = mask.frames
    else:
        arr = np.asarray(mask)
        frames = arr.astype(bool) if arr.ndim == 1 else arr.astype(bool).all(axis=1)
    if frames.shape[0] != T:
        raise ArgumentError(f"mask covers {frames.shape[0]} frames but the window has {T}")
    return frames


def apply_mask(window: np.ndarray, mask: Union[OcclusionMask, np.ndarray], fill: str = "zero") -> np.ndarray:
    """
    Replace occluded frames by 'fill': zeros, or the last observed frame
    (hold_last; leading occluded frames fall back to zero).
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ArgumentError(f"window must be a T x D matrix, got shape {window.shape}")
    if isinstance(mask, OcclusionMask) and mask.entries.shape != window.shape:
        raise ArgumentError(f"mask shape {mask.entries.shape} does not match window shape {window.shape}")
    if fill not in FILL_MODES:
        raise ArgumentError(f"Unknown fill '{fill}'. Expected one of {', '.join(FILL_MODES)}")

    frames = _mask_frames(mask, window.shape[0])
    out = window.copy()
    if fill == "zero":
        out[frames] = 0.0
        return out

    last = None
    for t in range(window.shape[0]):
        if frames[t]:
            out[t] = 0.0 if last is None else last
        else:
            last = window[t]
    return out


def add_observation_noise(window: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    """
    i.i.d. N(0, std^2) pixel noise on bbox/center channels (pixel space, before
    normalization). Speed is left untouched.
    """
    if std < 0:
        raise ArgumentError(f"noise std must be >= 0, got {std}")
    window = np.asarray(window, dtype=np.float64)
    out = window.copy()
    if std == 0:
        return out
    channels = list(PIXEL_CHANNELS)
    out[..., channels] = out[..., channels] + rng.normal(0.0, std, size=out[..., channels].shape)
    return out


def mask_observation(x: torch.Tensor, mask_frames: torch.Tensor) -> torch.Tensor:
    """Tensor form of apply_mask(fill='zero'): x [.., T, D], mask_frames [.., T] bool."""
    if mask_frames.shape != x.shape[:-1]:
        raise ArgumentError(f"mask shape {tuple(mask_frames.shape)} does not match sequence shape {tuple(x.shape[:-1])}")
    return torch.where(mask_frames.unsqueeze(-1), torch.zeros_like(x), x)
