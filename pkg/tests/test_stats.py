"""Regression, SNR, and sample-count statistics."""

import math

import numpy as np
import pytest

from coalsim import stats


def test_planted_line_recovered_exactly():
    x = np.arange(1.0, 33.0)
    y = 19.463 * x + 346.2
    fit = stats.fit_linear(x, y)
    assert fit.beta1 == pytest.approx(19.463, abs=1e-12)
    assert fit.beta0 == pytest.approx(346.2, abs=1e-9)
    assert fit.sigma_eps_sq == pytest.approx(0.0, abs=1e-18)
    assert fit.r_squared == pytest.approx(1.0)


def test_constant_y_gives_zero_slope_and_zero_noise():
    fit = stats.fit_linear(np.arange(10.0), np.full(10, 5.0))
    assert fit.beta1 == 0.0
    assert fit.sigma_eps_sq == 0.0


def test_constant_x_rejected():
    with pytest.raises(ValueError):
        stats.fit_linear(np.full(10, 2.0), np.arange(10.0))


def test_noise_variance_estimate_converges():
    rng = np.random.default_rng(0)
    sigma = 7.5
    x = rng.uniform(0, 32, 100_000)
    y = 3.0 * x + 10.0 + rng.normal(0, sigma, x.size)
    fit = stats.fit_linear(x, y)
    assert abs(fit.sigma_eps_sq - sigma**2) / sigma**2 < 0.05


def test_residuals_orthogonal_to_x():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 10, 10_000)
    y = 2.0 * x + rng.normal(0, 3.0, x.size)
    fit = stats.fit_linear(x, y)
    resid = y - (fit.beta1 * x + fit.beta0)
    rel = abs(float(resid @ x)) / (np.linalg.norm(resid) * np.linalg.norm(x))
    assert rel < 1e-9


def test_snr_scales_with_slope_squared():
    fit = stats.RegressionFit(beta1=2.0, beta0=0.0, sigma_eps_sq=4.0, r_squared=0.9, n_points=10)
    doubled = stats.RegressionFit(beta1=4.0, beta0=0.0, sigma_eps_sq=4.0, r_squared=0.9, n_points=10)
    assert stats.snr(doubled, 1.0).snr == pytest.approx(4 * stats.snr(fit, 1.0).snr)


def test_snr_closed_form():
    rng = np.random.default_rng(2)
    beta1, sigma = 5.0, 4.0
    x = rng.uniform(0, 32, 200_000)
    y = beta1 * x + rng.normal(0, sigma, x.size)
    fit = stats.fit_linear(x, y)
    est = stats.snr(fit, float(x.var()))
    assert abs(est.snr - beta1**2 * x.var() / sigma**2) / est.snr < 0.02


def test_snr_rejects_zero_noise():
    fit = stats.RegressionFit(beta1=1.0, beta0=0.0, sigma_eps_sq=0.0, r_squared=1.0, n_points=10)
    with pytest.raises(ValueError):
        stats.snr(fit, 1.0)


def test_success_probability_half_at_equal_correlations():
    for s in (10, 1000, 10**6):
        assert stats.success_probability(0.3, 0.3, s) == pytest.approx(0.5)


def test_success_probability_limits_and_domain():
    assert stats.success_probability(0.2, 0.0, 10**9) > 0.999999
    with pytest.raises(ValueError):
        stats.success_probability(0.2, 0.0, 3)
    with pytest.raises(ValueError):
        stats.success_probability(1.0, 0.0, 100)


def test_success_probability_monotone_grids():
    base = stats.success_probability(0.1, 0.01, 500)
    for s in (600, 1000, 5000):
        nxt = stats.success_probability(0.1, 0.01, s)
        assert nxt > base
        base = nxt
    base = 0.0
    for rp in (0.05, 0.1, 0.2, 0.4):
        nxt = stats.success_probability(rp, 0.01, 500)
        assert nxt > base
        base = nxt
    base = 1.0
    for ra in (0.0, 0.02, 0.05, 0.09):
        nxt = stats.success_probability(0.1, ra, 500)
        assert nxt < base
        base = nxt


def test_samples_required_oracle_value():
    # independent closed form: S = 2 (z_alpha / atanh(rho))^2 + 3
    z90 = 1.2815515655446004
    oracle = 2 * (z90 / math.atanh(0.1)) ** 2 + 3
    got = stats.samples_required(0.1, 0.0, 0.9)
    assert abs(got - oracle) <= 1.0
    assert got in (330, 331)


def test_samples_required_round_trip():
    for rp, ra, alpha in [(0.1, 0.0, 0.9), (0.05, 0.01, 0.8), (0.4, 0.1, 0.99), (0.02, 0.0, 0.95)]:
        s = stats.samples_required(rp, ra, alpha)
        assert stats.success_probability(rp, ra, s) >= alpha
        if s > 4:
            assert stats.success_probability(rp, ra, s - 1) < alpha


def test_samples_required_monotone_in_gap():
    wide = stats.samples_required(0.2, 0.0, 0.9)
    narrow = stats.samples_required(0.1, 0.0, 0.9)
    assert wide < narrow
    with pytest.raises(ValueError):
        stats.samples_required(0.1, 0.2, 0.9)
    with pytest.raises(ValueError):
        stats.samples_required(0.1, 0.0, 0.4)


def test_attenuate_hw():
    assert stats.attenuate_hw(0.5, 1e12) == pytest.approx(0.5)
    assert stats.attenuate_hw(0.5, 1 / 3) == pytest.approx(0.25)
    for snr_value in (0.01, 0.5, 2.0, 100.0):
        out = stats.attenuate_hw(0.8, snr_value)
        assert 0 < out <= 0.8
    with pytest.raises(ValueError):
        stats.attenuate_hw(0.5, 0.0)


def test_attenuate_sw():
    same = stats.AttenuationInputs(rho_tn=0.4, p_match=1.0, sigma_n=2.0, sigma_o=2.0)
    assert stats.attenuate_sw(same) == pytest.approx(0.4)
    gone = stats.AttenuationInputs(rho_tn=0.4, p_match=0.0, sigma_n=2.0, sigma_o=2.0)
    assert stats.attenuate_sw(gone) == 0.0
    with pytest.raises(ValueError):
        stats.AttenuationInputs(rho_tn=0.4, p_match=1.5, sigma_n=1.0, sigma_o=1.0)
    with pytest.raises(ValueError):
        stats.AttenuationInputs(rho_tn=0.4, p_match=0.5, sigma_n=0.0, sigma_o=1.0)


def test_combined_gain():
    assert stats.combined_gain(1, 1) == 1
    assert stats.combined_gain(80, 70) == 5600
    assert stats.combined_gain(1433, 178) == 255_074
    with pytest.raises(ValueError):
        stats.combined_gain(0.5, 2)
