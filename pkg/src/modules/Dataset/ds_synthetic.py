# -*- coding: utf-8 -*-

"""
Desk-scale synthetic pedestrian episodes.

Scene: 1920x1080 image, the roadway line is the vertical x = 960. A pedestrian
"crosses" when it heads toward that line. The label is a deterministic function
of the path: 1 iff the mean lateral velocity toward the road over the last
three frame-to-frame steps exceeds CROSS_VELOCITY_THRESHOLD px/frame.
"""

from typing import List, Tuple

import numpy as np

from src.modules.Dataset.Dataset import (
    DEFAULT_IMAGE_SIZE,
    MIN_TOTAL_FRAMES,
    DatasetManifest,
    TrajectoryRecord,
    default_stats,
    validate_record,
)
from src.utils.utils_errors import ArgumentError

PROFILES = ("walker", "stopper", "curver")

ROAD_LINE_X = 960.0
CROSS_VELOCITY_THRESHOLD = 2.0
FINAL_STEPS = 3

CROSS_SPEED_RANGE = (6.0, 12.0)        # px/frame toward the road
AWAY_SPEED_RANGE = (-6.0, -2.0)        # px/frame (negative = away from the road)
DRIFT_AMPLITUDE_RANGE = (2.0, 5.0)     # px
DRIFT_FREQUENCY_RANGE = (0.3, 0.6)     # rad/frame
JITTER_STD = 0.3                       # px, held while the pedestrian is stopped
EGO_SPEED_RANGE = (0.0, 50.0)          # km/h


def crossing_label(center_x: np.ndarray) -> int:
    """
    1 iff the final-3-step mean velocity toward ROAD_LINE_X exceeds the threshold.
    "Toward" is fixed by the side of the road the pedestrian starts on.
    """
    center_x = np.asarray(center_x, dtype=np.float64)
    toward = 1.0 if center_x[0] < ROAD_LINE_X else -1.0
    steps = np.diff(center_x[-(FINAL_STEPS + 1):]) * toward
    return int(steps.mean() > CROSS_VELOCITY_THRESHOLD)


def _moving_mask(T: int, rng: np.random.Generator, profile: str, crosses: bool) -> np.ndarray:
    """True where the pedestrian advances; stop events freeze every channel of the path."""
    moving = np.ones(T, dtype=bool)
    moving[0] = False
    if profile == "stopper":
        stop_start = int(rng.integers(T // 2, T - FINAL_STEPS))
        moving[stop_start:] = False
    elif profile == "curver":
        # crossers must be walking over the last FINAL_STEPS + 1 frames
        last_start = T - (FINAL_STEPS + 1) - 3 if crosses else T - 2
        if last_start > 2 and rng.random() < 0.7:
            start = int(rng.integers(2, last_start))
            length = int(rng.integers(2, 4))
            moving[start:start + length] = False
        if not crosses and rng.random() < 0.3:
            moving[T - (FINAL_STEPS + 1):] = False
    return moving


def _terminal_speed(rng: np.random.Generator, profile: str, crosses: bool) -> float:
    if crosses:
        return float(rng.uniform(*CROSS_SPEED_RANGE))
    if profile == "walker" and rng.random() < 0.5:
        return 0.0
    return float(rng.uniform(*AWAY_SPEED_RANGE))


def _episode(index: int, T: int, rng: np.random.Generator, profile: str) -> Tuple[np.ndarray, int]:
    crosses = profile != "stopper" and index % 2 == 0

    left_side = bool(rng.random() < 0.5)
    x0 = float(rng.uniform(300.0, 760.0)) if left_side else float(rng.uniform(1160.0, 1620.0))
    toward = 1.0 if left_side else -1.0
    y0 = float(rng.uniform(520.0, 760.0))
    vy = float(rng.uniform(-0.8, 0.8))

    moving = _moving_mask(T, rng, profile, crosses)
    clock = np.cumsum(moving).astype(np.float64)       # advances only while walking
    clock_max = max(clock[-1], 1.0)

    v_start = float(rng.uniform(-3.0, 8.0))
    v_end = _terminal_speed(rng, profile, crosses)
    ramp = np.clip(clock / (0.7 * clock_max), 0.0, 1.0)
    velocity = (v_start + (v_end - v_start) * ramp) * moving

    xc = x0 + toward * np.cumsum(velocity)
    if profile == "curver":
        amp = float(rng.uniform(*DRIFT_AMPLITUDE_RANGE))
        omega = float(rng.uniform(*DRIFT_FREQUENCY_RANGE))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        xc = xc + amp * (np.sin(omega * clock + phase) - np.sin(phase))
    yc = y0 + vy * clock

    jitter = np.zeros((T, 2))
    for t in range(1, T):
        jitter[t] = rng.normal(0.0, JITTER_STD, size=2) if moving[t] else jitter[t - 1]
    xc = xc + jitter[:, 0]
    yc = yc + jitter[:, 1]

    h0 = float(rng.uniform(80.0, 200.0))
    growth = float(rng.uniform(1.0, 1.01))
    box_h = h0 * growth ** np.arange(T)
    box_w = 0.4 * box_h

    ego0 = float(rng.uniform(*EGO_SPEED_RANGE))
    ego_slope = float(rng.uniform(-1.5, 1.5))
    ego = np.clip(ego0 + ego_slope * np.arange(T), EGO_SPEED_RANGE[0], 60.0)

    matrix = np.column_stack([
        xc - box_w / 2.0, yc - box_h / 2.0, xc + box_w / 2.0, yc + box_h / 2.0,
        xc, yc, ego,
    ])
    # center stays the exact midpoint in floating point
    matrix[:, 4] = (matrix[:, 0] + matrix[:, 2]) / 2.0
    matrix[:, 5] = (matrix[:, 1] + matrix[:, 3]) / 2.0
    return matrix, crossing_label(matrix[:, 4])


def generate_synthetic(n: int, T_total: int, rng: np.random.Generator, profile: str = "walker") -> DatasetManifest:
    """
    n episodes of T_total frames. Walker and curver alternate crossing targets
    per index (balanced labels); stopper is single-class by construction.
    Every record is validated; all ids land in the 'train' split until split_manifest.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if not isinstance(T_total, (int, np.integer)) or T_total < MIN_TOTAL_FRAMES:
        raise ArgumentError(f"T_total must be >= {MIN_TOTAL_FRAMES}, got {T_total}")
    if profile not in PROFILES:
        raise ArgumentError(f"Unknown profile '{profile}'. Expected one of {', '.join(PROFILES)}")

    records: List[TrajectoryRecord] = []
    for i in range(int(n)):
        matrix, label = _episode(i, int(T_total), rng, profile)
        record = TrajectoryRecord.from_matrix(f"syn-{profile}-{i:05d}", matrix, label, "synthetic", DEFAULT_IMAGE_SIZE)
        records.append(validate_record(record))

    return DatasetManifest(records=records, splits={"train": [r.id for r in records]}, stats=default_stats(records))
