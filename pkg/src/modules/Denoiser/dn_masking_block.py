# -*- coding: utf-8 -*-

import torch
import torch.nn as nn

from src.utils.utils_errors import ArgumentError


class OcclusionMaskingBlock(nn.Module):
    """
    Latent shortcut between encoder and decoder:
    Dec_in = Trans(Enc_out) on occluded frames, Enc_out on observed frames.
    Observed rows are passed through untouched (torch.where, not a blend).
    """

    def __init__(self, model_dim: int, heads: int, layers: int = 1, dropout: float = 0.1, ff_mult: int = 4) -> None:
        super().__init__()
        layer = nn.TransformerEncoderLayer(
            d_model=model_dim,
            nhead=heads,
            dim_feedforward=ff_mult * model_dim,
            dropout=dropout,
            batch_first=True,
        )
        self.transformer = nn.TransformerEncoder(layer, num_layers=layers, enable_nested_tensor=False)

    def forward(self, enc_out: torch.Tensor, mask_frames: torch.Tensor) -> torch.Tensor:
        if mask_frames.shape != enc_out.shape[:-1]:
            raise ArgumentError(
                f"masking block: mask shape {tuple(mask_frames.shape)} does not match tokens {tuple(enc_out.shape[:-1])}"
            )
        predicted = self.transformer(enc_out)
        return torch.where(mask_frames.to(torch.bool).unsqueeze(-1), predicted, enc_out)
