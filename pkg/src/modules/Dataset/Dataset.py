# -*- coding: utf-8 -*-

"""
Record schema, normalization and splitting for pedestrian episodes.

A record is one pedestrian track: per-frame bounding box, box center and ego
speed, plus the binary crossing label that refers to the frame right after the
observation window. The raw per-frame vector is always the 7-channel
concatenation [x_tl, y_tl, x_br, y_br, x_c, y_c, speed].
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.utils_errors import ArgumentError, RecordLookupError, ValidationError
from src.utils.utils_infrastructure import MSG_TAGS

# ============================ CHANNEL LAYOUT ============================ #
CHANNELS: Tuple[str, ...] = ("x_tl", "y_tl", "x_br", "y_br", "x_c", "y_c", "speed")
RAW_DIM = len(CHANNELS)
BBOX_SLICE = slice(0, 4)
CENTER_SLICE = slice(4, 6)
SPEED_SLICE = slice(6, 7)
PIXEL_CHANNELS = (0, 1, 2, 3, 4, 5)
X_CHANNELS = (0, 2, 4)
Y_CHANNELS = (1, 3, 5)
MODALITY_CHANNELS: Dict[str, Tuple[int, ...]] = {"B": (0, 1, 2, 3), "C": (4, 5), "V": (6,)}

SOURCES = ("synthetic", "pie", "jaad")
SPLIT_NAMES = ("train", "val", "test")

MIN_TOTAL_FRAMES = 16
OBS_WINDOW = 15
DEFAULT_IMAGE_SIZE = (1920.0, 1080.0)

CENTER_TOLERANCE = 1e-6


# ============================ DOMAIN TYPES ============================ #
@dataclass(frozen=True)
class FrameObs:
    bbox: Tuple[float, float, float, float]
    center: Tuple[float, float]
    speed: float

    def as_row(self) -> List[float]:
        return [*self.bbox, *self.center, self.speed]


@dataclass(frozen=True)
class TrajectoryRecord:
    id: str
    frames: Tuple[FrameObs, ...]
    label: int
    source: str = "synthetic"
    image_size: Tuple[float, float] = DEFAULT_IMAGE_SIZE

    @property
    def T_total(self) -> int:
        return len(self.frames)

    def to_matrix(self) -> np.ndarray:
        """Raw pixel-space matrix [T_total x 7] (float64)."""
        return np.asarray([f.as_row() for f in self.frames], dtype=np.float64)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "image_size": [_compact_number(v) for v in self.image_size],
            "label": int(self.label),
            "frames": [
                {
                    "bbox": [_compact_number(v) for v in f.bbox],
                    "center": [_compact_number(v) for v in f.center],
                    "speed": _compact_number(f.speed),
                }
                for f in self.frames
            ],
        }

    @classmethod
    def from_matrix(cls, record_id: str, matrix: np.ndarray, label: int, source: str = "synthetic",
                    image_size: Tuple[float, float] = DEFAULT_IMAGE_SIZE) -> "TrajectoryRecord":
        frames = tuple(
            FrameObs(
                bbox=(float(r[0]), float(r[1]), float(r[2]), float(r[3])),
                center=(float(r[4]), float(r[5])),
                speed=float(r[6]),
            )
            for r in np.asarray(matrix, dtype=np.float64)
        )
        return cls(id=record_id, frames=frames, label=int(label), source=source,
                   image_size=(float(image_size[0]), float(image_size[1])))


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel affine normalization: value_norm = (value - shift) / scale."""
    shift: Tuple[float, ...]
    scale: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.shift) != RAW_DIM or len(self.scale) != RAW_DIM:
            raise ArgumentError(f"NormalizationStats needs {RAW_DIM} shifts and scales, got {len(self.shift)}/{len(self.scale)}")
        for name, s in zip(CHANNELS, self.scale):
            if not (math.isfinite(s) and s > 0):
                raise ArgumentError(f"NormalizationStats scale for '{name}' must be finite and > 0 (got {s})")

    def to_dict(self) -> dict:
        return {"shift": list(self.shift), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, payload: dict) -> "NormalizationStats":
        return cls(shift=tuple(float(v) for v in payload["shift"]), scale=tuple(float(v) for v in payload["scale"]))

    @classmethod
    def identity(cls) -> "NormalizationStats":
        return cls(shift=(0.0,) * RAW_DIM, scale=(1.0,) * RAW_DIM)


@dataclass
class DatasetManifest:
    records: List[TrajectoryRecord]
    splits: Dict[str, List[str]] = field(default_factory=dict)
    stats: NormalizationStats = field(default_factory=NormalizationStats.identity)

    def __post_init__(self) -> None:
        known = {r.id for r in self.records}
        if len(known) != len(self.records):
            raise ValidationError("duplicate record ids in manifest")
        seen: Dict[str, str] = {}
        for split, ids in self.splits.items():
            for rid in ids:
                if rid not in known:
                    raise RecordLookupError(f"Split '{split}' references unknown record id '{rid}'")
                if rid in seen:
                    raise ValidationError(f"record listed in both '{seen[rid]}' and '{split}' splits", rid)
                seen[rid] = split

    def by_id(self) -> Dict[str, TrajectoryRecord]:
        return {r.id: r for r in self.records}

    def subset(self, split: str) -> List[TrajectoryRecord]:
        index = self.by_id()
        return [index[rid] for rid in self.splits.get(split, [])]

    def get(self, record_id: str) -> TrajectoryRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise RecordLookupError(f"Unknown record id '{record_id}'")


def _compact_number(value: float):
    value = round(float(value), 6)
    return int(value) if value.is_integer() else value


# ============================ VALIDATION ============================ #
def validate_record(record: TrajectoryRecord) -> TrajectoryRecord:
    """Raise ValidationError (naming the record) when an invariant does not hold."""
    rid = record.id
    if record.T_total < MIN_TOTAL_FRAMES:
        raise ValidationError(f"needs at least {MIN_TOTAL_FRAMES} frames, got {record.T_total}", rid)
    if record.label not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {record.label}", rid)
    if record.source not in SOURCES:
        raise ValidationError(f"unknown source '{record.source}'", rid)
    width, height = record.image_size
    if not (width > 0 and height > 0):
        raise ValidationError(f"image_size must be positive, got {record.image_size}", rid)

    matrix = record.to_matrix()
    if matrix.shape != (record.T_total, RAW_DIM):
        raise ValidationError("every frame must carry bbox(4), center(2) and speed(1)", rid)
    if not np.isfinite(matrix).all():
        bad = int(np.argwhere(~np.isfinite(matrix))[0][0])
        raise ValidationError(f"non-finite value at frame {bad}", rid)

    inverted = np.nonzero((matrix[:, 0] > matrix[:, 2]) | (matrix[:, 1] > matrix[:, 3]))[0]
    if inverted.size:
        raise ValidationError(f"bbox corners inverted at frame {int(inverted[0])} (x_TL > x_BR or y_TL > y_BR)", rid)

    mid_x = (matrix[:, 0] + matrix[:, 2]) / 2.0
    mid_y = (matrix[:, 1] + matrix[:, 3]) / 2.0
    dev = np.maximum(np.abs(matrix[:, 4] - mid_x) / width, np.abs(matrix[:, 5] - mid_y) / height)
    off = np.nonzero(dev > CENTER_TOLERANCE)[0]
    if off.size:
        raise ValidationError(f"center is not the bbox midpoint at frame {int(off[0])}", rid)
    return record


# ============================ NORMALIZATION ============================ #
def default_stats(records: Sequence[TrajectoryRecord], image_size: Optional[Tuple[float, float]] = None) -> NormalizationStats:
    """
    Pixel channels divided by image width/height; speed min-max scaled to [0, 1]
    over 'records'. The image size is taken from the records unless given.
    """
    if image_size is None:
        sizes = sorted({tuple(r.image_size) for r in records}) or [DEFAULT_IMAGE_SIZE]
        if len(sizes) > 1:
            print(f"[Dataset] {MSG_TAGS['WARNING']}records carry {len(sizes)} image sizes; using {sizes[-1]} for normalization")
        image_size = sizes[-1]
    width, height = float(image_size[0]), float(image_size[1])

    if records:
        speeds = np.concatenate([r.to_matrix()[:, 6] for r in records])
        lo, hi = float(speeds.min()), float(speeds.max())
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo if hi > lo else 1.0

    return NormalizationStats(
        shift=(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, lo),
        scale=(width, height, width, height, width, height, span),
    )


def normalize(record, stats: NormalizationStats) -> np.ndarray:
    """(value - shift) / scale per channel; accepts a record or a raw [.. x 7] matrix."""
    matrix = record.to_matrix() if isinstance(record, TrajectoryRecord) else np.asarray(record, dtype=np.float64)
    return (matrix - np.asarray(stats.shift)) / np.asarray(stats.scale)


def denormalize(matrix: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return np.asarray(matrix, dtype=np.float64) * np.asarray(stats.scale) + np.asarray(stats.shift)


def observation_window(matrix: np.ndarray, T_obs: int = OBS_WINDOW) -> np.ndarray:
    """The T_obs frames preceding the final frame (the label refers to the final one)."""
    matrix = np.asarray(matrix)
    if matrix.shape[0] < T_obs + 1:
        raise ArgumentError(f"Need at least {T_obs + 1} frames for a {T_obs}-frame window, got {matrix.shape[0]}")
    return matrix[-(T_obs + 1):-1]


# ============================ SPLITTING ============================ #
def _largest_remainder(n: int, ratios: Sequence[float]) -> List[int]:
    exact = [round(r * n, 9) for r in ratios]
    sizes = [int(math.floor(e)) for e in exact]
    remaining = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:remaining]:
        sizes[i] += 1
    return sizes


def split_manifest(manifest: DatasetManifest, ratios: Sequence[float], rng: np.random.Generator) -> DatasetManifest:
    """
    Disjoint covering train/val/test split, stratified by label.

    Split sizes follow largest-remainder rounding of ratio * n; records are
    shuffled per label and interleaved so every prefix keeps the label mix,
    then the interleaved order is cut into consecutive chunks.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ArgumentError(f"ratios must have 3 entries (train, val, test), got {len(ratios)}")
    if any((not math.isfinite(r)) or r < 0 for r in ratios):
        raise ArgumentError(f"ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ArgumentError(f"ratios must sum to 1 (got {sum(ratios):.6f})")

    records = sorted(manifest.records, key=lambda r: r.id)
    sizes = _largest_remainder(len(records), ratios)

    interleaved: List[Tuple[float, int, str]] = []
    for label in (0, 1):
        ids = [r.id for r in records if r.label == label]
        perm = rng.permutation(len(ids)) if ids else []
        for rank, idx in enumerate(perm):
            interleaved.append(((rank + 0.5) / len(ids), label, ids[int(idx)]))
    interleaved.sort()
    ordered = [rid for _, _, rid in interleaved]

    splits: Dict[str, List[str]] = {}
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        splits[name] = ordered[start:start + size]
        start += size

    return DatasetManifest(records=list(manifest.records), splits=splits, stats=manifest.stats)


def build_manifest(records: Sequence[TrajectoryRecord], ratios: Sequence[float], rng: np.random.Generator,
                   stats: Optional[NormalizationStats] = None) -> DatasetManifest:
    """Manifest with default stats computed on the train split only."""
    base = DatasetManifest(records=list(records), splits={"train": [r.id for r in records]})
    split = split_manifest(base, ratios, rng)
    if stats is None:
        train = split.subset("train") or list(records)
        stats = default_stats(train)
    return DatasetManifest(records=split.records, splits=split.splits, stats=stats)
