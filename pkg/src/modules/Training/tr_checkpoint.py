# -*- coding: utf-8 -*-

"""
Versioned checkpoint container shared by training, evaluation and the plots.

The file is a torch.save'd dict of plain python values and tensors only, so it
loads with weights_only=True.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import torch

from src.modules.Dataset.Dataset import NormalizationStats
from src.modules.Denoiser.Denoiser import DenoiserConfig, DenoiserModel
from src.modules.Diffusion.Diffusion import NoiseSchedule, schedule_from_state
from src.modules.Intention.Intention import IntentionConfig, IntentionModel
from src.utils.utils_errors import CheckpointVersionError, ConfigurationError, DataIOError
from src.utils.utils_io import ensure_parent_dir, pretty_path, to_long_path

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_KEYS = (
    "format_version",
    "denoiser_config",
    "intention_config",
    "denoiser_state",
    "intention_state",
    "schedule",
    "stats",
    "splits",
    "train_config",
    "epoch",
)


@dataclass
class ModelBundle:
    """Everything inference needs, restored from one checkpoint."""
    denoiser: DenoiserModel
    intention: IntentionModel
    schedule: NoiseSchedule
    stats: NormalizationStats
    splits: Dict[str, List[str]] = field(default_factory=dict)
    train_config: dict = field(default_factory=dict)
    epoch: int = 0
    val_metrics: Dict[str, float] = field(default_factory=dict)
    path: str = ""

    def eval(self) -> "ModelBundle":
        self.denoiser.eval()
        self.intention.eval()
        return self

    def to(self, device) -> "ModelBundle":
        self.denoiser.to(device)
        self.intention.to(device)
        return self


def _cpu_state(module: torch.nn.Module) -> Dict[str, torch.Tensor]:
    return {k: v.detach().cpu().clone() for k, v in module.state_dict().items()}


def save_checkpoint(path: str, denoiser: DenoiserModel, intention: IntentionModel, schedule: NoiseSchedule,
                    stats: NormalizationStats, splits: Dict[str, List[str]], train_config: dict, epoch: int,
                    val_metrics: Optional[Dict[str, float]] = None) -> str:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "denoiser_config": denoiser.config.to_dict(),
        "intention_config": intention.config.to_dict(),
        "denoiser_state": _cpu_state(denoiser),
        "intention_state": _cpu_state(intention),
        "schedule": schedule.to_state(),
        "stats": stats.to_dict(),
        "splits": {name: list(ids) for name, ids in splits.items()},
        "train_config": dict(train_config),
        "epoch": int(epoch),
        "val_metrics": {k: float(v) for k, v in (val_metrics or {}).items()},
    }
    target = ensure_parent_dir(path)
    try:
        torch.save(payload, target)
    except OSError as exc:
        raise DataIOError(f"Cannot write checkpoint ({exc.strerror or exc})", pretty_path(target)) from exc
    return target


def load_checkpoint(path: str, device=None) -> ModelBundle:
    """Restore a ModelBundle (models in eval mode); rejects other format versions."""
    source = to_long_path(path)
    if not os.path.isfile(source):
        raise DataIOError("Checkpoint not found", pretty_path(source))
    try:
        payload = torch.load(source, map_location="cpu", weights_only=True)
    except OSError as exc:
        raise DataIOError(f"Cannot read checkpoint ({exc.strerror or exc})", pretty_path(source)) from exc
    except Exception as exc:
        raise CheckpointVersionError(f"Not a readable checkpoint ({type(exc).__name__})", pretty_path(source)) from exc

    if not isinstance(payload, dict):
        raise CheckpointVersionError("Checkpoint payload is not a dictionary", pretty_path(source))
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"Unsupported checkpoint format version {version!r} (expected {CHECKPOINT_FORMAT_VERSION})", pretty_path(source)
        )
    missing = [k for k in CHECKPOINT_KEYS if k not in payload]
    if missing:
        raise CheckpointVersionError(f"Checkpoint is missing key(s) {', '.join(missing)}", pretty_path(source))

    try:
        denoiser = DenoiserModel(DenoiserConfig.from_dict(payload["denoiser_config"]))
        intention = IntentionModel(IntentionConfig.from_dict(payload["intention_config"]))
        denoiser.load_state_dict(payload["denoiser_state"])
        intention.load_state_dict(payload["intention_state"])
    except (ConfigurationError, RuntimeError, TypeError) as exc:
        raise CheckpointVersionError(f"Checkpoint schema mismatch ({exc})", pretty_path(source)) from exc

    bundle = ModelBundle(
        denoiser=denoiser,
        intention=intention,
        schedule=schedule_from_state(payload["schedule"]),
        stats=NormalizationStats.from_dict(payload["stats"]),
        splits={name: list(ids) for name, ids in payload["splits"].items()},
        train_config=dict(payload["train_config"]),
        epoch=int(payload["epoch"]),
        val_metrics=dict(payload.get("val_metrics", {})),
        path=pretty_path(source),
    )
    if device is not None:
        bundle.to(device)
    return bundle.eval()
