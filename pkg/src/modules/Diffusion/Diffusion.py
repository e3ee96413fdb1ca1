# -*- coding: utf-8 -*-

"""
Noise schedule, forward corruption and the occlusion-guided reverse sampler.

All tables are indexed by the diffusion step k = 0..K, with the k = 0 slot
holding the empty-product values (alpha_bar[0] = 1, beta[0] = 0). Tables are
float64; they are cast to the dtype/device of the tensor they act on.

Reverse sampling composes two Gaussians entry by entry: observed entries follow
the forward posterior q(x_{k-1} | x_k, x_obs), occluded entries follow the
network mean mu_theta. Both branches use the fixed posterior variance and share
one noise draw per step.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

import torch

from src.utils.utils_errors import ArgumentError, ConfigurationError, NumericalError

SCHEDULE_KINDS = ("cosine", "linear")
BETA_MIN = 1e-6
BETA_MAX = 0.999
TERMINAL_ALPHA_BAR_MAX = 0.01
COSINE_OFFSET = 0.008
RECONSTRUCTION_CLAMP = 2.0

StepIndex = Union[int, torch.Tensor]


# ============================ SCHEDULE ============================ #
@dataclass
class NoiseSchedule:
    K: int
    kind: str
    beta: torch.Tensor                  # [K+1], beta[0] = 0
    alpha: torch.Tensor                 # [K+1]
    alpha_bar: torch.Tensor             # [K+1], alpha_bar[0] = 1
    posterior_var: torch.Tensor         # [K+1], posterior_var[1] = 0
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ab = self.alpha_bar
        self.sqrt_alpha_bar = torch.sqrt(ab)
        self.sqrt_one_minus_alpha_bar = torch.sqrt(1.0 - ab)
        self.sqrt_recip_alpha = 1.0 / torch.sqrt(self.alpha)
        self.posterior_std = torch.sqrt(self.posterior_var)

        # mu_tilde = coef_obs * x_obs + coef_xk * x_k
        coef_obs = torch.zeros_like(ab)
        coef_xk = torch.zeros_like(ab)
        eps_coef = torch.zeros_like(ab)
        ks = torch.arange(1, self.K + 1)
        coef_obs[ks] = torch.sqrt(ab[ks - 1]) * self.beta[ks] / (1.0 - ab[ks])
        coef_xk[ks] = torch.sqrt(self.alpha[ks]) * (1.0 - ab[ks - 1]) / (1.0 - ab[ks])
        eps_coef[ks] = self.beta[ks] / torch.sqrt(1.0 - ab[ks])
        # alpha_bar[0] = 1 collapses the k = 1 posterior onto x_obs
        coef_obs[1] = 1.0
        coef_xk[1] = 0.0
        self.posterior_coef_obs = coef_obs
        self.posterior_coef_xk = coef_xk
        self.eps_coef = eps_coef

    def to_state(self) -> dict:
        return {"K": int(self.K), "kind": self.kind, "betas": self.beta[1:].tolist(), "params": dict(self.params)}

    def describe(self) -> str:
        return f"{self.kind} K={self.K} alpha_bar[K]={float(self.alpha_bar[-1]):.3e}"


def schedule_from_betas(betas, kind: str = "cosine", params: Optional[Dict[str, float]] = None) -> NoiseSchedule:
    """Build every derived table from beta[1..K]; checks all schedule invariants."""
    betas = torch.as_tensor(betas, dtype=torch.float64).reshape(-1)
    K = int(betas.numel())
    if K < 2:
        raise ArgumentError(f"K must be >= 2, got {K}")
    if not torch.all((betas > 0) & (betas < 1)):
        raise ConfigurationError("every beta must lie strictly inside (0, 1)")

    beta = torch.cat([torch.zeros(1, dtype=torch.float64), betas])
    alpha = 1.0 - beta
    alpha_bar = torch.cumprod(alpha, dim=0)
    alpha_bar[0] = 1.0

    terminal = float(alpha_bar[K])
    if not terminal < TERMINAL_ALPHA_BAR_MAX:
        raise ConfigurationError(
            f"schedule does not reach the near-latent regime: alpha_bar[{K}] = {terminal:.4f} "
            f"(must be < {TERMINAL_ALPHA_BAR_MAX})"
        )

    posterior_var = torch.zeros_like(beta)
    posterior_var[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
    posterior_var[1] = 0.0

    return NoiseSchedule(K=K, kind=kind, beta=beta, alpha=alpha, alpha_bar=alpha_bar,
                         posterior_var=posterior_var, params=dict(params or {}))


def build_schedule(K: int = 100, kind: str = "cosine", params: Optional[Dict[str, float]] = None) -> NoiseSchedule:
    """
    cosine (default): alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/K) + s)/(1 + s) * pi/2), s = 0.008.
    linear: beta evenly spaced from params['beta_start'] to params['beta_end'].
    Betas are clipped to (1e-6, 0.999) in both cases.
    """
    if not isinstance(K, int) or K < 2:
        raise ArgumentError(f"K must be an integer >= 2, got {K}")
    kind = str(kind).strip().lower()
    params = dict(params or {})

    if kind == "cosine":
        s = float(params.get("s", COSINE_OFFSET))
        t = torch.arange(K + 1, dtype=torch.float64)
        f = torch.cos(((t / K) + s) / (1.0 + s) * math.pi / 2.0) ** 2
        ab = f / f[0]
        betas = 1.0 - ab[1:] / ab[:-1]
        params = {"s": s}
    elif kind == "linear":
        start = float(params.get("beta_start", 1e-4))
        end = float(params.get("beta_end", 0.02))
        betas = torch.linspace(start, end, K, dtype=torch.float64)
        params = {"beta_start": start, "beta_end": end}
    else:
        raise ArgumentError(f"Unknown schedule kind '{kind}'. Expected one of {', '.join(SCHEDULE_KINDS)}")

    betas = betas.clamp(BETA_MIN, BETA_MAX)
    return schedule_from_betas(betas, kind=kind, params=params)


def schedule_from_state(state: dict) -> NoiseSchedule:
    return schedule_from_betas(state["betas"], kind=state.get("kind", "cosine"), params=state.get("params", {}))


# ============================ TABLE LOOKUP ============================ #
def _check_step(k: StepIndex, schedule: NoiseSchedule, low: int) -> None:
    if isinstance(k, torch.Tensor):
        if k.numel() == 0:
            raise ArgumentError("empty step tensor")
        lo, hi = int(k.min()), int(k.max())
    else:
        lo = hi = int(k)
    if lo < low or hi > schedule.K:
        raise ArgumentError(f"diffusion step must be in [{low}, {schedule.K}], got {lo if lo < low else hi}")


def _lookup(table: torch.Tensor, k: StepIndex, like: torch.Tensor) -> torch.Tensor:
    """table[k] cast to 'like'; a per-sample step vector [B] is shaped to broadcast over [B, ...]."""
    table = table.to(device=like.device, dtype=like.dtype)
    if isinstance(k, torch.Tensor) and k.dim() > 0:
        values = table[k.to(device=like.device, dtype=torch.long)]
        return values.reshape(-1, *([1] * (like.dim() - 1)))
    return table[int(k)]


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ArgumentError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


# ============================ FORWARD / POSTERIOR ============================ #
def forward_sample(x0: torch.Tensor, k: StepIndex, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """sqrt(alpha_bar_k) * x0 + sqrt(1 - alpha_bar_k) * eps."""
    _check_same_shape(x0, eps, "forward_sample")
    _check_step(k, schedule, 0)
    return _lookup(schedule.sqrt_alpha_bar, k, x0) * x0 + _lookup(schedule.sqrt_one_minus_alpha_bar, k, x0) * eps


def predict_x0(x_k: torch.Tensor, eps: torch.Tensor, k: StepIndex, schedule: NoiseSchedule) -> torch.Tensor:
    """Inverse of the forward marginal given the noise: (x_k - sqrt(1 - alpha_bar_k) eps) / sqrt(alpha_bar_k)."""
    _check_same_shape(x_k, eps, "predict_x0")
    _check_step(k, schedule, 1)
    return (x_k - _lookup(schedule.sqrt_one_minus_alpha_bar, k, x_k) * eps) / _lookup(schedule.sqrt_alpha_bar, k, x_k)


def posterior_observed(x_k: torch.Tensor, x_obs: torch.Tensor, k: StepIndex,
                       schedule: NoiseSchedule) -> Tuple[torch.Tensor, torch.Tensor]:
    """Forward-posterior mean given the observation, and its variance beta_tilde_k."""
    _check_same_shape(x_k, x_obs, "posterior_observed")
    _check_step(k, schedule, 1)
    mean = _lookup(schedule.posterior_coef_obs, k, x_k) * x_obs + _lookup(schedule.posterior_coef_xk, k, x_k) * x_k
    return mean, _lookup(schedule.posterior_var, k, x_k)


def mu_from_eps(x_k: torch.Tensor, eps_hat: torch.Tensor, k: StepIndex, schedule: NoiseSchedule) -> torch.Tensor:
    """Network mean (1/sqrt(alpha_k)) * (x_k - beta_k / sqrt(1 - alpha_bar_k) * eps_hat)."""
    _check_same_shape(x_k, eps_hat, "mu_from_eps")
    _check_step(k, schedule, 1)
    return _lookup(schedule.sqrt_recip_alpha, k, x_k) * (x_k - _lookup(schedule.eps_coef, k, x_k) * eps_hat)


# ============================ REVERSE STEPS ============================ #
def step_noise(x_k: torch.Tensor, k: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Standard normal draw for step k; k = 1 has zero variance and consumes no randomness."""
    if int(k) == 1:
        return torch.zeros_like(x_k)
    return torch.randn(x_k.shape, generator=generator, dtype=x_k.dtype, device=x_k.device)


def network_reverse_step(x_k: torch.Tensor, eps_hat: torch.Tensor, k: int, schedule: NoiseSchedule,
                         generator: Optional[torch.Generator] = None, noise: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Plain sample from N(mu_theta, beta_tilde_k I)."""
    z = step_noise(x_k, k, generator) if noise is None else noise
    return mu_from_eps(x_k, eps_hat, k, schedule) + _lookup(schedule.posterior_std, k, x_k) * z


def posterior_reverse_step(x_k: torch.Tensor, x_obs: torch.Tensor, k: int, schedule: NoiseSchedule,
                           generator: Optional[torch.Generator] = None, noise: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Plain sample from N(mu_tilde, beta_tilde_k I)."""
    z = step_noise(x_k, k, generator) if noise is None else noise
    mean, _ = posterior_observed(x_k, x_obs, k, schedule)
    return mean + _lookup(schedule.posterior_std, k, x_k) * z


def _entry_mask(mask: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    """Accept a frame mask [.., T] or an entry mask [.., T, D]; returns bool [.., T, D]."""
    mask = torch.as_tensor(mask, device=like.device)
    if mask.shape == like.shape[:-1]:
        mask = mask.unsqueeze(-1).expand_as(like)
    if mask.shape != like.shape:
        raise ArgumentError(f"mask shape {tuple(mask.shape)} does not match state shape {tuple(like.shape)}")
    return mask.to(torch.bool)


def masked_reverse_step(x_k: torch.Tensor, x_obs: torch.Tensor, mask: torch.Tensor, eps_hat: torch.Tensor, k: int,
                        schedule: NoiseSchedule, generator: Optional[torch.Generator] = None,
                        noise: Optional[torch.Tensor] = None, use_mask: bool = True) -> torch.Tensor:
    """
    x_{k-1} = M * (mu_theta + sigma z) + (1 - M) * (mu_tilde + sigma z), M = 1 on occluded entries.
    With use_mask=False every entry takes the network branch.
    """
    _check_same_shape(x_k, x_obs, "masked_reverse_step")
    _check_same_shape(x_k, eps_hat, "masked_reverse_step")
    _check_step(k, schedule, 1)
    entry_mask = _entry_mask(mask, x_k)

    z = step_noise(x_k, k, generator) if noise is None else noise
    occluded_branch = network_reverse_step(x_k, eps_hat, k, schedule, noise=z)
    if not use_mask:
        return occluded_branch
    observed_branch = posterior_reverse_step(x_k, x_obs, k, schedule, noise=z)
    return torch.where(entry_mask, occluded_branch, observed_branch)


# ============================ RECONSTRUCTION ============================ #
Denoiser = Callable[[torch.Tensor, torch.Tensor, torch.Tensor, int], torch.Tensor]


@torch.no_grad()
def reconstruct(x_obs: torch.Tensor, mask: torch.Tensor, denoiser: Denoiser, schedule: NoiseSchedule,
                generator: Optional[torch.Generator] = None, use_mask: bool = True,
                record_steps: Optional[Iterable[int]] = None, clamp: float = RECONSTRUCTION_CLAMP):
    """
    Run the masked reverse chain from x_K ~ N(0, I) down to k = 0.

    denoiser(x_k, x_obs, mask_frames, k) -> eps_hat, all batch-first. Inputs may
    be a single window [T, D] or a batch [B, T, D]. The k = 0 output is clamped
    to [-clamp, clamp]. With record_steps, returns (x0, {k: x_k}) where the
    recorded k = 0 state is the clamped output.
    """
    single = x_obs.dim() == 2
    xo = x_obs.unsqueeze(0) if single else x_obs
    entry_mask = _entry_mask(mask.unsqueeze(0) if single else mask, xo)
    mask_frames = entry_mask.all(dim=-1)

    wanted = set(int(s) for s in record_steps) if record_steps is not None else set()
    states: Dict[int, torch.Tensor] = {}

    x = torch.randn(xo.shape, generator=generator, dtype=xo.dtype, device=xo.device)
    if schedule.K in wanted:
        states[schedule.K] = x.clone()

    for k in range(schedule.K, 0, -1):
        eps_hat = denoiser(x, xo, mask_frames, k)
        x = masked_reverse_step(x, xo, entry_mask, eps_hat, k, schedule, generator=generator, use_mask=use_mask)
        if not torch.isfinite(x).all():
            raise NumericalError("non-finite state in the reverse chain", step=k)
        if (k - 1) in wanted and k - 1 > 0:
            states[k - 1] = x.clone()

    x = x.clamp(-clamp, clamp)
    if 0 in wanted:
        states[0] = x.clone()

    if single:
        x = x.squeeze(0)
        states = {k: v.squeeze(0) for k, v in states.items()}
    return (x, states) if record_steps is not None else x
