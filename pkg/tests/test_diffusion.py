# -*- coding: utf-8 -*-

import pytest
import torch

from src.modules.Diffusion.Diffusion import (
    build_schedule,
    forward_sample,
    masked_reverse_step,
    mu_from_eps,
    network_reverse_step,
    posterior_observed,
    posterior_reverse_step,
    predict_x0,
    reconstruct,
    schedule_from_betas,
    schedule_from_state,
)
from src.utils.utils_errors import ArgumentError, ConfigurationError, NumericalError


@pytest.fixture(scope="module")
def schedule():
    return build_schedule(100, "cosine")


def _zero_denoiser(x_k, x_obs, mask_frames, k):
    return torch.zeros_like(x_k)


# ============================ SCHEDULE ============================ #
def test_cosine_schedule_tables(schedule):
    ab = schedule.alpha_bar
    assert float(ab[0]) == 1.0
    assert torch.all(ab[1:] < ab[:-1])
    assert float(ab[100]) < 0.01
    assert float(schedule.posterior_var[1]) == 0.0
    assert torch.all(schedule.posterior_var[2:] > 0)
    assert torch.all((schedule.beta[1:] > 0) & (schedule.beta[1:] < 1))


@pytest.mark.parametrize("K, kind", [(100, "cosine"), (2, "cosine"), (1000, "linear")])
def test_posterior_variance_never_exceeds_beta(K, kind):
    sched = build_schedule(K, kind)
    assert torch.all(sched.posterior_var[1:] <= sched.beta[1:])


def test_linear_schedule_reaches_latent_regime():
    sched = build_schedule(1000, "linear")
    assert sched.params == {"beta_start": 1e-4, "beta_end": 0.02}
    assert float(sched.alpha_bar[-1]) < 0.01


def test_short_linear_schedule_is_rejected():
    with pytest.raises(ConfigurationError):
        build_schedule(10, "linear")


@pytest.mark.parametrize("K", [1, 0, -3])
def test_schedule_needs_two_steps(K):
    with pytest.raises(ArgumentError):
        build_schedule(K)


def test_unknown_schedule_kind():
    with pytest.raises(ArgumentError):
        build_schedule(50, "sigmoid")


def test_betas_outside_unit_interval():
    with pytest.raises(ConfigurationError):
        schedule_from_betas([0.5, 1.0, 0.5])


def test_schedule_state_round_trip(schedule):
    again = schedule_from_state(schedule.to_state())
    torch.testing.assert_close(again.alpha_bar, schedule.alpha_bar, rtol=0, atol=1e-12)
    assert again.K == schedule.K and again.kind == "cosine"


# ============================ FORWARD ============================ #
@pytest.mark.parametrize("k", [1, 50, 100])
def test_forward_marginal_moments(schedule, k):
    gen = torch.Generator().manual_seed(k)
    x0 = torch.randn(3, 7, generator=gen, dtype=torch.float64)
    n = 100_000
    eps = torch.randn(n, 3, 7, generator=gen, dtype=torch.float64)
    samples = forward_sample(x0.expand(n, -1, -1), k, eps, schedule)

    mean = samples.mean(dim=0)
    var = samples.var(dim=0)
    expected_mean = schedule.sqrt_alpha_bar[k] * x0
    expected_var = 1.0 - schedule.alpha_bar[k]
    se_mean = torch.sqrt(expected_var / n)
    se_var = expected_var * (2.0 / (n - 1)) ** 0.5
    # 21 entries checked at once, hence 5 standard errors
    assert torch.all((mean - expected_mean).abs() < 5 * se_mean)
    assert torch.all((var - expected_var).abs() < 5 * se_var)


def test_forward_step_zero_is_identity(schedule):
    x0 = torch.randn(15, 7, dtype=torch.float64)
    torch.testing.assert_close(forward_sample(x0, 0, torch.randn_like(x0), schedule), x0)


def test_forward_rejects_step_outside_chain(schedule):
    x0 = torch.zeros(15, 7)
    with pytest.raises(ArgumentError):
        forward_sample(x0, 101, x0, schedule)
    with pytest.raises(ArgumentError):
        forward_sample(torch.zeros(2, 15, 7), torch.tensor([3, -1]), torch.zeros(2, 15, 7), schedule)


def test_forward_shape_mismatch(schedule):
    with pytest.raises(ArgumentError):
        forward_sample(torch.zeros(15, 7), 5, torch.zeros(14, 7), schedule)


def test_oracle_noise_recovers_x0(schedule):
    gen = torch.Generator().manual_seed(4)
    for _ in range(10):
        x0 = torch.randn(15, 7, generator=gen, dtype=torch.float64)
        eps = torch.randn(15, 7, generator=gen, dtype=torch.float64)
        for k in range(1, schedule.K + 1):
            x_k = forward_sample(x0, k, eps, schedule)
            assert (predict_x0(x_k, eps, k, schedule) - x0).abs().max() < 1e-6


def test_per_sample_steps_broadcast(schedule):
    x0 = torch.randn(4, 15, 7, dtype=torch.float64)
    eps = torch.randn_like(x0)
    ks = torch.tensor([1, 10, 50, 100])
    batched = forward_sample(x0, ks, eps, schedule)
    for i, k in enumerate(ks.tolist()):
        torch.testing.assert_close(batched[i], forward_sample(x0[i], k, eps[i], schedule))


# ============================ POSTERIOR ============================ #
def test_posterior_at_step_one_collapses_onto_observation(schedule):
    x_k = torch.randn(15, 7, dtype=torch.float64)
    x_obs = torch.randn(15, 7, dtype=torch.float64)
    mean, var = posterior_observed(x_k, x_obs, 1, schedule)
    torch.testing.assert_close(mean, x_obs)
    assert float(var) == 0.0


def test_posterior_mean_matches_closed_form(schedule):
    k = 40
    x_k = torch.randn(15, 7, dtype=torch.float64)
    x_obs = torch.randn(15, 7, dtype=torch.float64)
    ab, b = schedule.alpha_bar, schedule.beta
    expected = (ab[k - 1].sqrt() * b[k] / (1 - ab[k])) * x_obs \
        + ((1 - b[k]).sqrt() * (1 - ab[k - 1]) / (1 - ab[k])) * x_k
    mean, var = posterior_observed(x_k, x_obs, k, schedule)
    torch.testing.assert_close(mean, expected)
    torch.testing.assert_close(var, (1 - ab[k - 1]) / (1 - ab[k]) * b[k])


def test_network_mean_with_true_noise_matches_posterior_mean(schedule):
    x0 = torch.randn(15, 7, dtype=torch.float64)
    eps = torch.randn_like(x0)
    for k in (2, 30, 99):
        x_k = forward_sample(x0, k, eps, schedule)
        mean, _ = posterior_observed(x_k, x0, k, schedule)
        torch.testing.assert_close(mu_from_eps(x_k, eps, k, schedule), mean)


# ============================ MASKED REVERSE STEP ============================ #
def _step_inputs(seed=0):
    gen = torch.Generator().manual_seed(seed)
    shape = (2, 15, 7)
    return tuple(torch.randn(shape, generator=gen, dtype=torch.float64) for _ in range(3))


@pytest.mark.parametrize("k", [1, 2, 57])
def test_all_occluded_step_is_the_network_step(schedule, k):
    x_k, x_obs, eps_hat = _step_inputs()
    mask = torch.ones(2, 15, dtype=torch.bool)
    out = masked_reverse_step(x_k, x_obs, mask, eps_hat, k, schedule, generator=torch.Generator().manual_seed(9))
    ref = network_reverse_step(x_k, eps_hat, k, schedule, generator=torch.Generator().manual_seed(9))
    assert torch.equal(out, ref)


@pytest.mark.parametrize("k", [1, 2, 57])
def test_all_observed_step_is_the_posterior_step(schedule, k):
    x_k, x_obs, eps_hat = _step_inputs()
    mask = torch.zeros(2, 15, dtype=torch.bool)
    out = masked_reverse_step(x_k, x_obs, mask, eps_hat, k, schedule, generator=torch.Generator().manual_seed(9))
    ref = posterior_reverse_step(x_k, x_obs, k, schedule, generator=torch.Generator().manual_seed(9))
    assert torch.equal(out, ref)


def test_mixed_mask_step_composes_entrywise(schedule):
    x_k, x_obs, eps_hat = _step_inputs(1)
    k = 33
    frames = torch.zeros(2, 15, dtype=torch.bool)
    frames[0, [1, 4, 9]] = True
    frames[1, 5:12] = True
    z = torch.randn(2, 15, 7, dtype=torch.float64)
    out = masked_reverse_step(x_k, x_obs, frames, eps_hat, k, schedule, noise=z)

    sigma = schedule.posterior_std[k]
    occluded = mu_from_eps(x_k, eps_hat, k, schedule) + sigma * z
    observed = posterior_observed(x_k, x_obs, k, schedule)[0] + sigma * z
    M = frames.unsqueeze(-1).to(torch.float64)
    assert torch.equal(out, torch.where(M.bool().expand_as(out), occluded, observed))
    torch.testing.assert_close(out, M * occluded + (1 - M) * observed)


def test_masking_disabled_takes_the_network_branch(schedule):
    x_k, x_obs, eps_hat = _step_inputs(2)
    z = torch.randn_like(x_k)
    out = masked_reverse_step(x_k, x_obs, torch.zeros(2, 15, dtype=torch.bool), eps_hat, 20, schedule,
                              noise=z, use_mask=False)
    assert torch.equal(out, network_reverse_step(x_k, eps_hat, 20, schedule, noise=z))


def test_step_zero_is_not_a_reverse_step(schedule):
    x_k, x_obs, eps_hat = _step_inputs()
    with pytest.raises(ArgumentError):
        masked_reverse_step(x_k, x_obs, torch.zeros(2, 15, dtype=torch.bool), eps_hat, 0, schedule)


def test_mask_shape_must_match(schedule):
    x_k, x_obs, eps_hat = _step_inputs()
    with pytest.raises(ArgumentError):
        masked_reverse_step(x_k, x_obs, torch.zeros(2, 14, dtype=torch.bool), eps_hat, 5, schedule)


# ============================ RECONSTRUCTION ============================ #
def test_fully_observed_reconstruction_pins_the_observation(schedule):
    x_obs = torch.rand(4, 15, 7, dtype=torch.float64) * 2 - 1
    mask = torch.zeros(4, 15, dtype=torch.bool)
    out = reconstruct(x_obs, mask, _zero_denoiser, schedule, generator=torch.Generator().manual_seed(0))
    assert (out - x_obs).abs().max() < 1e-3


def test_single_window_reconstruction_records_steps(schedule):
    x_obs = torch.rand(15, 7, dtype=torch.float64) - 0.5
    mask = torch.zeros(15, dtype=torch.bool)
    mask[3:6] = True
    out, states = reconstruct(x_obs, mask, _zero_denoiser, schedule,
                              generator=torch.Generator().manual_seed(0), record_steps=[100, 50, 0])
    assert out.shape == (15, 7)
    assert sorted(states) == [0, 50, 100]
    assert torch.equal(states[0], out)
    assert out.abs().max() <= 2.0
    observed = ~mask
    assert (out[observed] - x_obs[observed]).abs().max() < 1e-3


def test_reconstruction_is_reproducible_under_a_seed(schedule):
    x_obs = torch.rand(2, 15, 7, dtype=torch.float64)
    mask = torch.ones(2, 15, dtype=torch.bool)
    mask[:, 0] = False
    a = reconstruct(x_obs, mask, _zero_denoiser, schedule, generator=torch.Generator().manual_seed(5))
    b = reconstruct(x_obs, mask, _zero_denoiser, schedule, generator=torch.Generator().manual_seed(5))
    assert torch.equal(a, b)


def test_two_step_chain_matches_hand_computation():
    sched = schedule_from_betas([0.5, 0.99])
    b1, b2 = 0.5, 0.99
    ab1 = 1 - b1
    ab2 = ab1 * (1 - b2)
    x_obs = torch.tensor([[0.4, -0.2], [0.1, 0.3], [-0.5, 0.6], [0.2, 0.0]], dtype=torch.float64)
    mask = torch.tensor([False, True, True, False])

    def scaled_denoiser(x_k, xo, mask_frames, k):
        return 0.3 * x_k + 0.1 * k

    out = reconstruct(x_obs, mask, scaled_denoiser, sched, generator=torch.Generator().manual_seed(11))

    gen = torch.Generator().manual_seed(11)
    x2 = torch.randn((1, 4, 2), generator=gen, dtype=torch.float64)[0]
    z2 = torch.randn((1, 4, 2), generator=gen, dtype=torch.float64)[0]
    sigma2 = ((1 - ab1) / (1 - ab2) * b2) ** 0.5
    net2 = (x2 - b2 / (1 - ab2) ** 0.5 * (0.3 * x2 + 0.2)) / (1 - b2) ** 0.5 + sigma2 * z2
    post2 = ab1 ** 0.5 * b2 / (1 - ab2) * x_obs + (1 - b2) ** 0.5 * (1 - ab1) / (1 - ab2) * x2 + sigma2 * z2
    x1 = torch.where(mask[:, None], net2, post2)
    net1 = (x1 - b1 / (1 - ab1) ** 0.5 * (0.3 * x1 + 0.1)) / (1 - b1) ** 0.5
    expected = torch.where(mask[:, None], net1, x_obs).clamp(-2.0, 2.0)

    torch.testing.assert_close(out, expected, atol=1e-12, rtol=1e-12)


def test_non_finite_estimate_stops_the_chain_at_its_step(schedule):
    def broken_denoiser(x_k, x_obs, mask_frames, k):
        return torch.full_like(x_k, float("nan")) if k == 37 else torch.zeros_like(x_k)

    mask = torch.zeros(15, dtype=torch.bool)
    mask[4:7] = True
    with pytest.raises(NumericalError) as excinfo:
        reconstruct(torch.zeros(15, 7, dtype=torch.float64), mask, broken_denoiser, schedule,
                    generator=torch.Generator().manual_seed(0))
    assert excinfo.value.step == 37
    assert "k=37" in str(excinfo.value)


def test_true_noise_denoiser_recovers_occluded_entries(schedule):
    gen = torch.Generator().manual_seed(4)
    x0 = torch.rand((3, 15, 7), generator=gen, dtype=torch.float64) * 2 - 1
    mask = torch.zeros(3, 15, dtype=torch.bool)
    mask[:, 5:10] = True
    x_obs = x0.masked_fill(mask.unsqueeze(-1), 0.0)

    def true_noise(x_k, xo, mask_frames, k):
        ab = schedule.alpha_bar[k].item()
        return (x_k - ab ** 0.5 * x0) / (1 - ab) ** 0.5

    out = reconstruct(x_obs, mask, true_noise, schedule, generator=torch.Generator().manual_seed(9))
    occluded = mask.unsqueeze(-1).expand_as(x0)
    assert (out[occluded] - x0[occluded]).abs().max() < 1e-6
    assert (out[~occluded] - x0[~occluded]).abs().max() < 1e-6
