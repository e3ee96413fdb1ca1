# -*- coding: utf-8 -*-

"""
Input feature extraction: per-modality MLP + positional encoding + GRU,
temporal attention context, multimodal fusion and diffusion-step embedding.
All tensors are batch-first [B, T, D].
"""

import math
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.utils.utils_errors import ArgumentError

FUSION_KINDS = ("gate", "concat", "average")


def sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    """Classic sin/cos table [length, dim]; odd dims keep the last cosine column dropped."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div_term = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term)[:, : dim // 2]
    return table.float()


def sinusoidal_step_embedding(k: torch.Tensor, dim: int) -> torch.Tensor:
    """Embedding of integer diffusion steps k [B] -> [B, dim]."""
    k = k.reshape(-1).to(torch.float64)
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half, 1))
    args = k.unsqueeze(1) * freqs.to(k.device).unsqueeze(0)
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class SinusoidalPositionalEncoding(nn.Module):
    def __init__(self, dim: int, max_len: int = 512) -> None:
        super().__init__()
        self.register_buffer("table", sinusoidal_table(max_len, dim), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        T = x.shape[-2]
        if T > self.table.shape[0]:
            raise ArgumentError(f"sequence of {T} steps exceeds positional table of {self.table.shape[0]}")
        return x + self.table[:T].to(dtype=x.dtype, device=x.device)


class ModalityEncoder(nn.Module):
    """E(MLP(seq) + PE): two linear layers with a ReLU, sinusoidal positions, then a GRU."""

    def __init__(self, in_dim: int, model_dim: int, dropout: float = 0.0) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.mlp = nn.Sequential(nn.Linear(in_dim, model_dim), nn.ReLU(), nn.Linear(model_dim, model_dim))
        self.pos = SinusoidalPositionalEncoding(model_dim)
        self.dropout = nn.Dropout(dropout)
        self.gru = nn.GRU(model_dim, model_dim, batch_first=True)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        if seq.shape[-1] != self.in_dim:
            raise ArgumentError(f"modality encoder expects {self.in_dim} features per step, got {seq.shape[-1]}")
        hidden, _ = self.gru(self.dropout(self.pos(self.mlp(seq))))
        return hidden


class TemporalAttentionContext(nn.Module):
    """
    alpha_{t,j} = softmax_j(v^T tanh(W_h h_t + W_x h_j)), c_t = sum_j alpha_{t,j} h_j,
    g_t = FC(tanh(W_c [c_t; h_t])).
    """

    def __init__(self, model_dim: int) -> None:
        super().__init__()
        self.w_h = nn.Linear(model_dim, model_dim, bias=False)
        self.w_x = nn.Linear(model_dim, model_dim, bias=False)
        self.score = nn.Linear(model_dim, 1, bias=False)
        self.w_c = nn.Linear(2 * model_dim, model_dim, bias=False)
        self.fc = nn.Linear(model_dim, model_dim)

    def forward(self, hidden: torch.Tensor, return_weights: bool = False):
        query = self.w_h(hidden).unsqueeze(2)          # [B, T, 1, D]
        keys = self.w_x(hidden).unsqueeze(1)           # [B, 1, T, D]
        scores = self.score(torch.tanh(query + keys)).squeeze(-1)
        weights = torch.softmax(scores, dim=-1)        # [B, T, T]
        context = torch.bmm(weights, hidden)
        out = self.fc(torch.tanh(self.w_c(torch.cat([context, hidden], dim=-1))))
        return (out, weights) if return_weights else out


class GateFusion(nn.Module):
    """
    gate:    H = proj(sigmoid(MLP1(G)) * MLP2(G) + G), G = [G_B; G_C; G_V] (3D -> D)
    concat:  H = proj(G)
    average: H = (G_B + G_C + G_V) / 3
    """

    def __init__(self, model_dim: int, kind: str = "gate") -> None:
        super().__init__()
        if kind not in FUSION_KINDS:
            raise ArgumentError(f"Unknown fusion '{kind}'. Expected one of {', '.join(FUSION_KINDS)}")
        self.kind = kind
        wide = 3 * model_dim
        if kind == "gate":
            self.mlp1 = nn.Linear(wide, wide)
            self.mlp2 = nn.Linear(wide, wide)
        if kind in ("gate", "concat"):
            self.proj = nn.Linear(wide, model_dim)

    def forward(self, g_b: torch.Tensor, g_c: torch.Tensor, g_v: torch.Tensor) -> torch.Tensor:
        if not (g_b.shape == g_c.shape == g_v.shape):
            raise ArgumentError(
                f"fusion inputs must share a shape, got {tuple(g_b.shape)}, {tuple(g_c.shape)}, {tuple(g_v.shape)}"
            )
        if self.kind == "average":
            return (g_b + g_c + g_v) / 3.0
        g = torch.cat([g_b, g_c, g_v], dim=-1)
        if self.kind == "concat":
            return self.proj(g)
        return self.proj(torch.sigmoid(self.mlp1(g)) * self.mlp2(g) + g)


class StepEmbedding(nn.Module):
    """MLP_K(sinusoidal(k)) -> [B, D]."""

    def __init__(self, model_dim: int) -> None:
        super().__init__()
        self.model_dim = model_dim
        self.mlp = nn.Sequential(nn.Linear(model_dim, model_dim), nn.SiLU(), nn.Linear(model_dim, model_dim))

    def forward(self, k: torch.Tensor, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
        emb = sinusoidal_step_embedding(k, self.model_dim).to(device=k.device)
        weight_dtype = self.mlp[0].weight.dtype
        return self.mlp(emb.to(weight_dtype)).to(dtype or weight_dtype)
