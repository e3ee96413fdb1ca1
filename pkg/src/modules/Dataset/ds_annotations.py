# -*- coding: utf-8 -*-

"""
JSON Lines ingestion of annotation-level exports (PIE, JAAD, synthetic).

One record per line:
  {"id": str, "source": "pie"|"jaad"|"synthetic", "image_size": [w, h], "label": 0|1,
   "frames": [{"bbox": [xtl, ytl, xbr, ybr], "center": [xc, yc], "speed": number | {"action": str}}, ...]}

PIE ships ego-vehicle speed; JAAD only ships vehicle actions, which are mapped
to an ordinal speed proxy by encode_vehicle_action.
"""

import math
from typing import Dict, Iterable, List, Optional, Sequence

from src.modules.Dataset.Dataset import (
    DEFAULT_IMAGE_SIZE,
    FrameObs,
    OBS_WINDOW,
    SOURCES,
    TrajectoryRecord,
    validate_record,
)
from src.utils.utils_errors import ArgumentError, ParseError
from src.utils.utils_io import iter_jsonl, pretty_path, write_jsonl

ANNOTATION_KINDS = ("pie", "jaad")

VEHICLE_ACTION_SPEED: Dict[str, float] = {
    "stopped": 0.0,
    "decelerating": 0.25,
    "moving_slow": 0.5,
    "moving_fast": 0.75,
    "accelerating": 1.0,
}


def encode_vehicle_action(action: str) -> float:
    """Ordinal speed proxy for a JAAD vehicle action label."""
    key = str(action).strip().lower().replace(" ", "_").replace("-", "_")
    if key not in VEHICLE_ACTION_SPEED:
        raise ParseError(f"Unknown vehicle action '{action}'. Expected one of {', '.join(VEHICLE_ACTION_SPEED)}")
    return VEHICLE_ACTION_SPEED[key]


# ============================ PARSING ============================ #
def _numbers(value, count: int, what: str, line_no: int) -> List[float]:
    if not isinstance(value, (list, tuple)) or len(value) != count:
        raise ParseError(f"'{what}' must be a list of {count} numbers", line_no=line_no)
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"'{what}' must contain numbers", line_no=line_no) from exc


def _speed(value, line_no: int) -> float:
    if isinstance(value, dict):
        if "action" not in value:
            raise ParseError("'speed' object must carry an 'action' label", line_no=line_no)
        try:
            return encode_vehicle_action(value["action"])
        except ParseError as exc:
            raise ParseError(str(exc), line_no=line_no) from exc
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError("'speed' must be a number or {\"action\": str}", line_no=line_no)
    return float(value)


def record_from_json(obj: dict, line_no: int = 0, default_source: str = "synthetic") -> TrajectoryRecord:
    """Build and validate one record; structural problems raise ParseError, invariant breaches ValidationError."""
    for key in ("id", "label", "frames"):
        if key not in obj:
            raise ParseError(f"missing field '{key}'", line_no=line_no)

    record_id = str(obj["id"])
    source = str(obj.get("source", default_source)).strip().lower()
    if source not in SOURCES:
        raise ParseError(f"unknown source '{source}'", line_no=line_no)

    image_size = obj.get("image_size", list(DEFAULT_IMAGE_SIZE))
    width, height = _numbers(image_size, 2, "image_size", line_no)

    label = obj["label"]
    if isinstance(label, bool) or not isinstance(label, (int, float)) or not float(label).is_integer():
        raise ParseError(f"'label' must be 0 or 1, got {label!r}", line_no=line_no)

    raw_frames = obj["frames"]
    if not isinstance(raw_frames, list):
        raise ParseError("'frames' must be a list", line_no=line_no)

    frames = []
    for idx, frame in enumerate(raw_frames):
        if not isinstance(frame, dict) or "bbox" not in frame or "speed" not in frame:
            raise ParseError(f"frame {idx} needs 'bbox' and 'speed'", line_no=line_no)
        bbox = _numbers(frame["bbox"], 4, f"frames[{idx}].bbox", line_no)
        if "center" in frame:
            center = _numbers(frame["center"], 2, f"frames[{idx}].center", line_no)
        else:
            center = [(bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0]
        frames.append(FrameObs(bbox=tuple(bbox), center=tuple(center), speed=_speed(frame["speed"], line_no)))

    record = TrajectoryRecord(
        id=record_id,
        frames=tuple(frames),
        label=int(label),
        source=source,
        image_size=(width, height),
    )
    return validate_record(record)


def load_records(path: str, default_source: str = "synthetic") -> List[TrajectoryRecord]:
    """Read every record of a JSON Lines dataset file (any source)."""
    records: List[TrajectoryRecord] = []
    seen = set()
    for line_no, obj in iter_jsonl(path):
        record = record_from_json(obj, line_no, default_source)
        if record.id in seen:
            raise ParseError(f"duplicate record id '{record.id}'", line_no=line_no)
        seen.add(record.id)
        records.append(record)
    return records


def load_annotations(path: str, kind: str) -> List[TrajectoryRecord]:
    """PIE/JAAD export loader; lines without an explicit source take 'kind'."""
    kind = str(kind).strip().lower()
    if kind not in ANNOTATION_KINDS:
        raise ArgumentError(f"Unknown annotation kind '{kind}'. Expected one of {', '.join(ANNOTATION_KINDS)}")
    records = load_records(path, default_source=kind)
    print(f"[Dataset] Loaded {len(records)} {kind.upper()} record(s) from '{pretty_path(path)}'")
    return records


def write_records(records: Iterable[TrajectoryRecord], path: str) -> str:
    return write_jsonl(path, [r.to_json() for r in records])


# ============================ TRACK WINDOWS ============================ #
def make_track_windows(record: TrajectoryRecord, T_obs: int = OBS_WINDOW, overlap: float = 0.5,
                       max_windows: Optional[int] = None) -> List[TrajectoryRecord]:
    """
    Cut a long track into overlapping (T_obs + 1)-frame records '<id>#<n>'.
    Windows are anchored at the end of the track, so window #0 always ends on
    the final (labelled) frame; every window inherits the track label.
    """
    if not 0.0 <= overlap < 1.0:
        raise ArgumentError(f"overlap must be in [0, 1), got {overlap}")
    length = T_obs + 1
    if record.T_total <= length:
        return [record]

    stride = max(1, int(math.floor(length * (1.0 - overlap) + 0.5)))
    windows: List[TrajectoryRecord] = []
    end = record.T_total
    n = 0
    while end - length >= 0:
        if max_windows is not None and n >= max_windows:
            break
        frames = record.frames[end - length:end]
        windows.append(TrajectoryRecord(
            id=f"{record.id}#{n}",
            frames=frames,
            label=record.label,
            source=record.source,
            image_size=record.image_size,
        ))
        end -= stride
        n += 1
    return windows


def expand_tracks(records: Sequence[TrajectoryRecord], T_obs: int = OBS_WINDOW, overlap: float = 0.5,
                  max_windows: Optional[int] = None) -> List[TrajectoryRecord]:
    out: List[TrajectoryRecord] = []
    for record in records:
        out.extend(make_track_windows(record, T_obs, overlap, max_windows))
    return out
