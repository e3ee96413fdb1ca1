# -*- coding: utf-8 -*-

"""
Noise-estimation network eps_theta(x_k, X_obs, M, k).

Pipeline per call:
  masked observation -> per-modality encoders (MLP + PE + GRU) -> temporal
  attention context -> fusion -> + step embedding = X_obs_k (conditioning)
  noisy x_k -> Linear(7, D) + PE -> encoder blocks -> occlusion masking block
  -> decoder blocks -> Linear(D, 7)
Every block regresses its AdaLN scales/shifts/offsets from X_obs_k.
"""

from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn

from src.modules.Dataset.Dataset import MODALITY_CHANNELS, OBS_WINDOW, RAW_DIM
from src.modules.Denoiser.dn_deformable_attention import (
    AXES,
    SPATIAL_RESIDUALS,
    AdaLNParams,
    BasicAttentionBlock,
    DeformableBlock,
    adaln_params,
)
from src.modules.Denoiser.dn_feature_extraction import (
    FUSION_KINDS,
    GateFusion,
    ModalityEncoder,
    SinusoidalPositionalEncoding,
    StepEmbedding,
    TemporalAttentionContext,
)
from src.modules.Denoiser.dn_masking_block import OcclusionMaskingBlock
from src.modules.Occlusion.Occlusion import mask_observation
from src.utils.utils_errors import ArgumentError, ConfigurationError, NumericalError

MODALITIES = ("B", "C", "V")
ATTENTION_KINDS = ("deformable", "basic")


# ============================ CONFIG ============================ #
@dataclass
class DenoiserConfig:
    model_dim: int = 64
    heads: int = 8
    encoder_layers: int = 2
    decoder_layers: int = 2
    masking_block_layers: int = 1
    dropout: float = 0.1
    raw_dim: int = RAW_DIM
    window: int = OBS_WINDOW
    offset_clamp: float = 0.25
    fusion: str = "gate"
    attention: str = "deformable"
    context_conditioning: bool = False
    use_masking_block: bool = True
    inputs: Tuple[str, ...] = MODALITIES
    spatial_residual: str = "scn"

    def validate(self) -> "DenoiserConfig":
        if self.model_dim < 1 or self.heads < 1 or self.model_dim % self.heads:
            raise ConfigurationError(f"model_dim ({self.model_dim}) must be a positive multiple of heads ({self.heads})")
        for name in ("encoder_layers", "decoder_layers", "masking_block_layers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.raw_dim != RAW_DIM:
            raise ConfigurationError(f"raw_dim is fixed at {RAW_DIM}, got {self.raw_dim}")
        if self.window < 1:
            raise ConfigurationError(f"window must be >= 1, got {self.window}")
        if not 0.0 <= self.offset_clamp <= 1.0:
            raise ConfigurationError(f"offset_clamp must be in [0, 1], got {self.offset_clamp}")
        if self.fusion not in FUSION_KINDS:
            raise ConfigurationError(f"Unknown fusion '{self.fusion}'. Expected one of {', '.join(FUSION_KINDS)}")
        if self.attention not in ATTENTION_KINDS:
            raise ConfigurationError(f"Unknown attention '{self.attention}'. Expected one of {', '.join(ATTENTION_KINDS)}")
        if self.spatial_residual not in SPATIAL_RESIDUALS:
            raise ConfigurationError(f"Unknown spatial_residual '{self.spatial_residual}'")
        inputs = tuple(str(m).strip().upper() for m in self.inputs)
        if not inputs or any(m not in MODALITIES for m in inputs) or len(set(inputs)) != len(inputs):
            raise ConfigurationError(f"inputs must be a non-empty subset of {', '.join(MODALITIES)}, got {self.inputs}")
        # canonical order keeps checkpoints comparable
        self.inputs = tuple(m for m in MODALITIES if m in inputs)
        return self

    @property
    def reconstructs(self) -> bool:
        """Velocity alone carries no pixel channels to recover, so the diffusion branch is skipped."""
        return any(m in self.inputs for m in ("B", "C"))

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["inputs"] = list(self.inputs)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "DenoiserConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigurationError(f"Unknown denoiser config key(s): {', '.join(unknown)}")
        values = dict(payload)
        if "inputs" in values:
            values["inputs"] = tuple(values["inputs"])
        return cls(**values).validate()


def input_channel_mask(inputs: Sequence[str]) -> torch.Tensor:
    """Bool [7]: True on raw channels that belong to a kept modality."""
    keep = torch.zeros(RAW_DIM, dtype=torch.bool)
    for m in inputs:
        keep[list(MODALITY_CHANNELS[m])] = True
    return keep


def _batched(x: torch.Tensor, dims: int = 3) -> Tuple[torch.Tensor, bool]:
    if x.dim() == dims - 1:
        return x.unsqueeze(0), True
    return x, False


# ============================ MODEL ============================ #
class DenoiserModel(nn.Module):
    def __init__(self, config: Optional[DenoiserConfig] = None) -> None:
        super().__init__()
        self.config = (config or DenoiserConfig()).validate()
        cfg = self.config
        D = cfg.model_dim

        self.encoders = nn.ModuleDict(
            {m: ModalityEncoder(len(MODALITY_CHANNELS[m]), D, cfg.dropout) for m in cfg.inputs}
        )
        self.contexts = nn.ModuleDict({m: TemporalAttentionContext(D) for m in cfg.inputs})
        self.fusion = GateFusion(D, cfg.fusion)
        self.step_embedding = StepEmbedding(D)

        self.input_proj = nn.Linear(cfg.raw_dim, D)
        self.input_pos = SinusoidalPositionalEncoding(D)
        if cfg.context_conditioning:
            self.context_proj = nn.Linear(2 * D, D)

        self.encoder_blocks = nn.ModuleList([self._make_block() for _ in range(cfg.encoder_layers)])
        self.decoder_blocks = nn.ModuleList([self._make_block() for _ in range(cfg.decoder_layers)])
        if cfg.use_masking_block:
            self.masking_block = OcclusionMaskingBlock(D, cfg.heads, cfg.masking_block_layers, cfg.dropout)

        self.output_head = nn.Linear(D, cfg.raw_dim)

    def _make_block(self) -> nn.Module:
        cfg = self.config
        if cfg.attention == "basic":
            return BasicAttentionBlock(cfg.window, cfg.model_dim, cfg.heads, cfg.dropout)
        return DeformableBlock(cfg.window, cfg.model_dim, cfg.heads, cfg.dropout, cfg.offset_clamp, cfg.spatial_residual)

    def parameter_count(self) -> int:
        return int(sum(p.numel() for p in self.parameters()))

    # ---------------- conditioning path ----------------
    def encode_modality(self, seq: torch.Tensor, which: str) -> torch.Tensor:
        """G = E(MLP(seq) + PE) for modality B, C or V; [T, d_m] or [B, T, d_m]."""
        which = str(which).strip().upper()
        if which not in self.encoders:
            raise ArgumentError(f"modality '{which}' is not an input of this model ({', '.join(self.config.inputs)})")
        x, single = _batched(seq)
        out = self.encoders[which](x)
        return out.squeeze(0) if single else out

    def temporal_attention_context(self, hidden: torch.Tensor, which: str = "B", return_weights: bool = False):
        which = str(which).strip().upper()
        if which not in self.contexts:
            raise ArgumentError(f"modality '{which}' is not an input of this model")
        x, single = _batched(hidden)
        out = self.contexts[which](x, return_weights=return_weights)
        if not single:
            return out
        if return_weights:
            return out[0].squeeze(0), out[1].squeeze(0)
        return out.squeeze(0)

    def gate_fuse(self, g_b: torch.Tensor, g_c: torch.Tensor, g_v: torch.Tensor) -> torch.Tensor:
        return self.fusion(g_b, g_c, g_v)

    def step_condition(self, h: torch.Tensor, k: Union[int, torch.Tensor]) -> torch.Tensor:
        """X_obs_k = H + MLP_K(PE(k)), the step embedding broadcast over time."""
        x, single = _batched(h)
        steps = self._steps(k, x.shape[0], x.device)
        out = x + self.step_embedding(steps, dtype=x.dtype).unsqueeze(1)
        return out.squeeze(0) if single else out

    def condition(self, x_obs_masked: torch.Tensor, k: Union[int, torch.Tensor]) -> torch.Tensor:
        """Masked observation [B, T, 7] -> X_obs_k [B, T, D]."""
        groups = []
        for m in MODALITIES:
            if m in self.encoders:
                seq = x_obs_masked[..., list(MODALITY_CHANNELS[m])]
                groups.append(self.contexts[m](self.encoders[m](seq)))
            else:
                groups.append(None)
        reference = next(g for g in groups if g is not None)
        g_b, g_c, g_v = (g if g is not None else torch.zeros_like(reference) for g in groups)
        return self.step_condition(self.fusion(g_b, g_c, g_v), k)

    # ---------------- backbone ----------------
    def adaln_params(self, x_obs_k: torch.Tensor, block: int = 0) -> AdaLNParams:
        """AdaLN groups of encoder block 'block' (deformable attention only)."""
        target = self.encoder_blocks[block]
        if not isinstance(target, DeformableBlock):
            raise ArgumentError("adaln_params is defined for deformable blocks only")
        return adaln_params(x_obs_k, target.regressor)

    def deformable_axis_attention(self, h_in: torch.Tensor, params: AdaLNParams, axis: str, block: int = 0,
                                  residual: Optional[torch.Tensor] = None) -> torch.Tensor:
        if axis not in AXES:
            raise ArgumentError(f"Unknown axis '{axis}'. Expected one of {', '.join(AXES)}")
        target = self.encoder_blocks[block]
        if not isinstance(target, DeformableBlock):
            raise ArgumentError("deformable_axis_attention is defined for deformable blocks only")
        if axis == "temporal":
            out, _ = target.temporal(h_in, params.sc1, params.sh1, params.sc2, params.x_kt, residual=residual)
        else:
            out, _ = target.spatial(h_in, params.sc3, params.sh2, params.sc4, params.x_kd, residual=residual)
        if not torch.isfinite(out).all():
            raise NumericalError(f"non-finite output in {axis} deformable attention")
        return out

    def occlusion_masking_block(self, enc_out: torch.Tensor, mask_frames: torch.Tensor) -> torch.Tensor:
        if not self.config.use_masking_block:
            return enc_out
        return self.masking_block(enc_out, mask_frames)

    @staticmethod
    def _steps(k: Union[int, torch.Tensor], batch: int, device) -> torch.Tensor:
        if isinstance(k, torch.Tensor) and k.dim() > 0:
            steps = k.reshape(-1).to(device=device, dtype=torch.long)
            if steps.numel() != batch:
                raise ArgumentError(f"got {steps.numel()} diffusion steps for a batch of {batch}")
            return steps
        return torch.full((batch,), int(k), dtype=torch.long, device=device)

    @staticmethod
    def _frame_mask(mask: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
        mask = torch.as_tensor(mask, device=like.device).to(torch.bool)
        if mask.shape == like.shape:
            mask = mask.all(dim=-1)
        if mask.shape != like.shape[:-1]:
            raise ArgumentError(f"mask shape {tuple(mask.shape)} does not match sequence {tuple(like.shape)}")
        return mask

    def estimate_noise(self, x_k: torch.Tensor, x_obs: torch.Tensor, mask: torch.Tensor,
                       k: Union[int, torch.Tensor]) -> torch.Tensor:
        """eps_hat [T, 7] or [B, T, 7]; mask is per frame [.., T] or per entry [.., T, 7]."""
        if x_k.shape != x_obs.shape:
            raise ArgumentError(f"x_k {tuple(x_k.shape)} and x_obs {tuple(x_obs.shape)} must share a shape")
        if x_k.shape[-1] != self.config.raw_dim or x_k.shape[-2] != self.config.window:
            raise ArgumentError(
                f"expected [.., {self.config.window}, {self.config.raw_dim}] windows, got {tuple(x_k.shape)}"
            )
        single = x_k.dim() == 2
        xk = x_k.unsqueeze(0) if single else x_k
        xo = x_obs.unsqueeze(0) if single else x_obs
        frames = self._frame_mask(mask.unsqueeze(0) if single else mask, xo)
        step = int(k) if not (isinstance(k, torch.Tensor) and k.dim() > 0) else None

        x_obs_k = self.condition(mask_observation(xo, frames), k)
        h = self.input_pos(self.input_proj(xk))
        if self.config.context_conditioning:
            h = self.context_proj(torch.cat([h, x_obs_k], dim=-1))
            steps = self._steps(k, xk.shape[0], xk.device)
            cond = self.step_embedding(steps, dtype=h.dtype).unsqueeze(1).expand_as(h)
        else:
            cond = x_obs_k

        for block in self.encoder_blocks:
            h = block(h, cond, step=step)
        h = self.occlusion_masking_block(h, frames)
        for block in self.decoder_blocks:
            h = block(h, cond, step=step)

        eps_hat = self.output_head(h)
        if not torch.isfinite(eps_hat).all():
            raise NumericalError("non-finite noise estimate", step=step)
        return eps_hat.squeeze(0) if single else eps_hat

    def forward(self, x_k: torch.Tensor, x_obs: torch.Tensor, mask: torch.Tensor,
                k: Union[int, torch.Tensor]) -> torch.Tensor:
        return self.estimate_noise(x_k, x_obs, mask, k)
