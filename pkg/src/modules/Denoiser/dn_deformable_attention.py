# -*- coding: utf-8 -*-

"""
AdaLN-conditioned deformable axis attention.

One regression head turns the conditioning features into per-token scales,
shifts and offset features. Each block runs a temporal stage (tokens = frames,
grid length T) followed by a spatial stage (tokens = feature columns, grid
length D). In both stages keys/values are read from the normalized features
resampled at learned fractional positions P + offset by linear interpolation.
"""

from dataclasses import dataclass, fields
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.utils.utils_errors import ArgumentError, NumericalError

AXES = ("temporal", "spatial")
SPATIAL_RESIDUALS = ("scn", "temporal")


# ============================ ADALN ============================ #
@dataclass
class AdaLNParams:
    sc1: torch.Tensor
    sh1: torch.Tensor
    sc2: torch.Tensor
    x_kt: torch.Tensor
    sc3: torch.Tensor
    sh2: torch.Tensor
    sc4: torch.Tensor
    x_kd: torch.Tensor

    def as_tuple(self) -> Tuple[torch.Tensor, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


ADALN_GROUPS = len(fields(AdaLNParams))
# Sc1/Sc3 multiply the normalized features, so they start at 1
ADALN_UNIT_GROUPS = (0, 4)


class AdaLNRegressor(nn.Module):
    """
    MLP_Ada: SiLU + Linear(D -> groups*D), split into 'groups' tensors [B, T, D].
    The final layer is zero-initialized; its bias puts 'unit_groups' at 1 and the
    rest at 0, so attention branches are gated off at init.
    """

    def __init__(self, model_dim: int, groups: int = ADALN_GROUPS, unit_groups: Sequence[int] = ADALN_UNIT_GROUPS) -> None:
        super().__init__()
        self.groups = groups
        self.model_dim = model_dim
        self.act = nn.SiLU()
        self.linear = nn.Linear(model_dim, groups * model_dim)
        nn.init.zeros_(self.linear.weight)
        with torch.no_grad():
            bias = torch.zeros(groups, model_dim)
            for g in unit_groups:
                bias[g] = 1.0
            self.linear.bias.copy_(bias.reshape(-1))

    def forward(self, cond: torch.Tensor) -> Tuple[torch.Tensor, ...]:
        return self.linear(self.act(cond)).chunk(self.groups, dim=-1)


def adaln_params(cond: torch.Tensor, regressor: AdaLNRegressor) -> AdaLNParams:
    if regressor.groups != ADALN_GROUPS:
        raise ArgumentError(f"deformable blocks need {ADALN_GROUPS} AdaLN groups, regressor emits {regressor.groups}")
    return AdaLNParams(*regressor(cond))


# ============================ SAMPLING ============================ #
def linear_interpolate_rows(features: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
    """
    Sample rows of features [B, L, C] at fractional positions [B, L'] in [0, L-1]:
    (1 - w) * row[floor(p)] + w * row[floor(p) + 1]. Integer positions return the
    row exactly.
    """
    L = features.shape[1]
    pos = positions.clamp(0.0, float(L - 1))
    lower = pos.detach().floor().clamp(0, L - 1)
    weight = (pos - lower).unsqueeze(-1).to(features.dtype)
    lower_idx = lower.long()
    upper_idx = (lower_idx + 1).clamp(max=L - 1)

    C = features.shape[-1]
    gather_lower = lower_idx.unsqueeze(-1).expand(-1, -1, C)
    gather_upper = upper_idx.unsqueeze(-1).expand(-1, -1, C)
    rows_lower = torch.gather(features, 1, gather_lower)
    rows_upper = torch.gather(features, 1, gather_upper)
    return (1.0 - weight) * rows_lower + weight * rows_upper


class OffsetNetwork(nn.Module):
    """Mean-pool the offset features over the non-grid axis, then a 2-layer MLP -> one offset per grid point."""

    def __init__(self, grid_len: int, hidden: int = 64) -> None:
        super().__init__()
        self.grid_len = grid_len
        self.mlp = nn.Sequential(nn.Linear(grid_len, hidden), nn.GELU(), nn.Linear(hidden, grid_len))
        nn.init.zeros_(self.mlp[-1].weight)
        nn.init.zeros_(self.mlp[-1].bias)

    def forward(self, offset_features: torch.Tensor, pool_dim: int) -> torch.Tensor:
        pooled = offset_features.mean(dim=pool_dim)
        if pooled.shape[-1] != self.grid_len:
            raise ArgumentError(f"offset network built for a grid of {self.grid_len}, got {pooled.shape[-1]}")
        return self.mlp(pooled)


class AxisMultiHeadAttention(nn.Module):
    """
    Scaled multi-head attention with its own inner width (heads * head_dim), so
    the token width does not have to be divisible by the head count.
    """

    def __init__(self, token_dim: int, heads: int, head_dim: int, dropout: float = 0.0) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = head_dim
        inner = heads * head_dim
        self.q = nn.Linear(token_dim, inner)
        self.k = nn.Linear(token_dim, inner)
        self.v = nn.Linear(token_dim, inner)
        self.out = nn.Linear(inner, token_dim)
        self.dropout = nn.Dropout(dropout)
        self.last_weights: Optional[torch.Tensor] = None

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        B, N, _ = x.shape
        return x.view(B, N, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, query: torch.Tensor, context: torch.Tensor, keep_weights: bool = False) -> torch.Tensor:
        q, k, v = self._split(self.q(query)), self._split(self.k(context)), self._split(self.v(context))
        scores = q @ k.transpose(-2, -1) / (self.head_dim ** 0.5)
        weights = torch.softmax(scores, dim=-1)
        if keep_weights:
            self.last_weights = weights.detach()
        attended = self.dropout(weights) @ v
        B, _, N, _ = attended.shape
        return self.out(attended.transpose(1, 2).reshape(B, N, self.heads * self.head_dim))


# ============================ AXIS STAGES ============================ #
class DeformableAxisAttention(nn.Module):
    """
    temporal: H_scn = Norm(H)*Sc1 + Sh1; keys/values from H_scn rows sampled at P_T + dT;
              out = MHA(H_scn, H_sem)*Sc2 + H.
    spatial:  H_scn = Norm(H)*Sc3 + Sh2 on the temporal output; columns sampled at P_D + dD;
              out = MHA(...)*Sc4 + residual (temporal-stage H_scn by default).
    """

    def __init__(self, axis: str, window: int, model_dim: int, heads: int, dropout: float = 0.0,
                 offset_clamp: float = 0.25, offset_hidden: int = 64) -> None:
        super().__init__()
        if axis not in AXES:
            raise ArgumentError(f"Unknown axis '{axis}'. Expected one of {', '.join(AXES)}")
        if model_dim % heads:
            raise ArgumentError(f"model_dim {model_dim} is not divisible by {heads} heads")
        self.axis = axis
        grid_len = window if axis == "temporal" else model_dim
        token_dim = model_dim if axis == "temporal" else window
        self.grid_len = grid_len
        self.max_offset = offset_clamp * grid_len
        self.positions = nn.Parameter(torch.arange(grid_len, dtype=torch.float32))
        self.offsets = OffsetNetwork(grid_len, offset_hidden)
        self.attention = AxisMultiHeadAttention(token_dim, heads, model_dim // heads, dropout)

    def sample_positions(self, offset_features: torch.Tensor) -> torch.Tensor:
        # temporal grid: pool over features; spatial grid: pool over time
        pool_dim = -1 if self.axis == "temporal" else -2
        delta = self.offsets(offset_features, pool_dim).clamp(-self.max_offset, self.max_offset)
        positions = self.positions.to(delta.dtype).unsqueeze(0) + delta
        return positions.clamp(0.0, float(self.grid_len - 1))

    def forward(self, h_in: torch.Tensor, scale: torch.Tensor, shift: torch.Tensor, gate: torch.Tensor,
                offset_features: torch.Tensor, residual: Optional[torch.Tensor] = None,
                keep_weights: bool = False) -> Tuple[torch.Tensor, torch.Tensor]:
        """Returns (output, H_scn) with everything in [B, T, D] layout."""
        h_scn = F.layer_norm(h_in, h_in.shape[-1:]) * scale + shift
        positions = self.sample_positions(offset_features)

        tokens = h_scn if self.axis == "temporal" else h_scn.transpose(1, 2)
        sampled = linear_interpolate_rows(tokens, positions)
        attended = self.attention(tokens, sampled, keep_weights=keep_weights)
        if self.axis == "spatial":
            attended = attended.transpose(1, 2)

        base = h_in if residual is None else residual
        return attended * gate + base, h_scn


class DeformableBlock(nn.Module):
    """
    Temporal then spatial deformable attention, both conditioned by one AdaLN regressor.

    With the zero-initialised gates a fresh block returns layer_norm(h) under
    spatial_residual="scn" (the default) and exactly h under "temporal".
    """

    def __init__(self, window: int, model_dim: int, heads: int, dropout: float = 0.0, offset_clamp: float = 0.25,
                 spatial_residual: str = "scn") -> None:
        super().__init__()
        if spatial_residual not in SPATIAL_RESIDUALS:
            raise ArgumentError(f"Unknown spatial residual '{spatial_residual}'. Expected one of {', '.join(SPATIAL_RESIDUALS)}")
        self.spatial_residual = spatial_residual
        self.regressor = AdaLNRegressor(model_dim)
        self.temporal = DeformableAxisAttention("temporal", window, model_dim, heads, dropout, offset_clamp)
        self.spatial = DeformableAxisAttention("spatial", window, model_dim, heads, dropout, offset_clamp)

    def forward(self, h: torch.Tensor, cond: torch.Tensor, step: Optional[int] = None) -> torch.Tensor:
        p = adaln_params(cond, self.regressor)
        h_t, h_tscn = self.temporal(h, p.sc1, p.sh1, p.sc2, p.x_kt)
        residual = h_tscn if self.spatial_residual == "scn" else h_t
        out, _ = self.spatial(h_t, p.sc3, p.sh2, p.sc4, p.x_kd, residual=residual)
        if not torch.isfinite(out).all():
            raise NumericalError("non-finite output in deformable attention", step=step)
        return out


class BasicAttentionBlock(nn.Module):
    """
    Plain AdaLN transformer block (no deformable sampling):
    h = h + Sc2 * MHA(Norm(h)*Sc1 + Sh1); h = h + Sc4 * FFN(Norm(h)*Sc3 + Sh2).
    """

    def __init__(self, window: int, model_dim: int, heads: int, dropout: float = 0.0, ff_mult: int = 4) -> None:
        super().__init__()
        self.regressor = AdaLNRegressor(model_dim, groups=6, unit_groups=(0, 3))
        self.attention = AxisMultiHeadAttention(model_dim, heads, model_dim // heads, dropout)
        self.ffn = nn.Sequential(
            nn.Linear(model_dim, ff_mult * model_dim), nn.GELU(), nn.Dropout(dropout), nn.Linear(ff_mult * model_dim, model_dim)
        )

    def forward(self, h: torch.Tensor, cond: torch.Tensor, step: Optional[int] = None) -> torch.Tensor:
        sc1, sh1, sc2, sc3, sh2, sc4 = self.regressor(cond)
        x = F.layer_norm(h, h.shape[-1:]) * sc1 + sh1
        h = h + sc2 * self.attention(x, x)
        x = F.layer_norm(h, h.shape[-1:]) * sc3 + sh2
        out = h + sc4 * self.ffn(x)
        if not torch.isfinite(out).all():
            raise NumericalError("non-finite output in attention block", step=step)
        return out
