# -*- coding: utf-8 -*-

"""
Crossing-intention classifier: transformer encoder over the (reconstructed)
observation window, temporal pooling and a 2-way softmax head.
"""

from dataclasses import asdict, dataclass, fields
from typing import Optional

import torch
import torch.nn as nn

from src.modules.Dataset.Dataset import RAW_DIM
from src.modules.Denoiser.dn_feature_extraction import SinusoidalPositionalEncoding
from src.utils.utils_errors import ArgumentError, ConfigurationError

POOLING_KINDS = ("mean", "last")


@dataclass
class IntentionConfig:
    layers: int = 4
    heads: int = 4
    model_dim: int = 64
    pooling: str = "mean"
    dropout: float = 0.1
    ff_mult: int = 4

    def validate(self) -> "IntentionConfig":
        if self.model_dim < 1 or self.heads < 1 or self.model_dim % self.heads:
            raise ConfigurationError(f"model_dim ({self.model_dim}) must be a positive multiple of heads ({self.heads})")
        if self.layers < 1:
            raise ConfigurationError(f"layers must be >= 1, got {self.layers}")
        if self.pooling not in POOLING_KINDS:
            raise ConfigurationError(f"Unknown pooling '{self.pooling}'. Expected one of {', '.join(POOLING_KINDS)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "IntentionConfig":
        unknown = sorted(set(payload) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigurationError(f"Unknown intention config key(s): {', '.join(unknown)}")
        return cls(**payload).validate()


class IntentionModel(nn.Module):
    def __init__(self, config: Optional[IntentionConfig] = None) -> None:
        super().__init__()
        self.config = (config or IntentionConfig()).validate()
        cfg = self.config
        self.embed = nn.Linear(RAW_DIM, cfg.model_dim)
        self.pos = SinusoidalPositionalEncoding(cfg.model_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.model_dim,
            nhead=cfg.heads,
            dim_feedforward=cfg.ff_mult * cfg.model_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.layers, enable_nested_tensor=False)
        self.head = nn.Linear(cfg.model_dim, 2)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        """[B, T, 7] -> [B, 2] (index 1 = crossing)."""
        h = self.encoder(self.pos(self.embed(x)))
        pooled = h.mean(dim=1) if self.config.pooling == "mean" else h[:, -1]
        return self.head(pooled)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Two-class probabilities [B, 2]."""
        return torch.softmax(self.logits(x), dim=-1)

    def parameter_count(self) -> int:
        return int(sum(p.numel() for p in self.parameters()))


def predict_intention(x_rec0: torch.Tensor, model: IntentionModel) -> torch.Tensor:
    """
    P(cross) for one window [T, 7] (0-d tensor) or a batch [B, T, 7] ([B]).
    Gradients flow when the caller does not disable them.
    """
    if not torch.isfinite(x_rec0).all():
        raise ArgumentError("intention input contains non-finite values")
    if x_rec0.shape[-1] != RAW_DIM:
        raise ArgumentError(f"intention input must have {RAW_DIM} channels, got {x_rec0.shape[-1]}")
    single = x_rec0.dim() == 2
    x = x_rec0.unsqueeze(0) if single else x_rec0
    p_cross = model(x)[:, 1]
    return p_cross.squeeze(0) if single else p_cross


def classify(p: float, threshold: float = 0.5) -> int:
    """1 iff p >= threshold."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"probability must be in [0, 1], got {p}")
    return 1 if p >= threshold else 0
