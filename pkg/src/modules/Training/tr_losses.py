# -*- coding: utf-8 -*-

from typing import Union

import torch

from src.utils.utils_errors import ArgumentError

PROB_CLAMP = 1e-7
REDUCTIONS = ("mean", "none")


def _check_reduction(reduction: str) -> None:
    if reduction not in REDUCTIONS:
        raise ArgumentError(f"Unknown reduction '{reduction}'. Expected one of {', '.join(REDUCTIONS)}")


def loss_simple(eps: torch.Tensor, eps_hat: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """
    MSE between true and predicted noise. reduction='none' keeps one value per
    sample (mean over every axis but the first).
    """
    if eps.shape != eps_hat.shape:
        raise ArgumentError(f"loss_simple: shape mismatch {tuple(eps.shape)} vs {tuple(eps_hat.shape)}")
    _check_reduction(reduction)
    sq = (eps_hat - eps) ** 2
    if reduction == "mean" or sq.dim() < 2:
        return sq.mean()
    return sq.flatten(start_dim=1).mean(dim=1)


def loss_intent(y: Union[int, torch.Tensor], y_hat: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """Binary cross-entropy -y log p - (1 - y) log(1 - p), with p clamped to [1e-7, 1 - 1e-7]."""
    _check_reduction(reduction)
    y_hat = torch.as_tensor(y_hat)
    y = torch.as_tensor(y, dtype=y_hat.dtype, device=y_hat.device)
    p = y_hat.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    per_sample = -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))
    return per_sample.mean() if reduction == "mean" else per_sample


def total_loss(l_simp, l_int, lam: float):
    """l_simp + lam * l_int; per-sample tensors stay per-sample (the caller averages)."""
    return l_simp + lam * l_int
