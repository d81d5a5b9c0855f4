"""Regression, SNR, and success-probability mathematics.

The timing model is affine (time = beta1 * count + beta0 + noise); the
leakiness of a configuration is the SNR of that fit, and the number of
samples an attacker needs follows from the Fisher z-transform of the peak
and average correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegressionFit:
    beta1: float
    beta0: float
    sigma_eps_sq: float
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.sigma_eps_sq < 0 or self.n_points < 2:
            raise ValueError("invalid fit")


@dataclass(frozen=True)
class SnrEstimate:
    snr: float
    sigma_n_sq: float
    fit: RegressionFit

    def __post_init__(self):
        if self.snr < 0:
            raise ValueError("snr must be non-negative")


@dataclass(frozen=True)
class AttenuationInputs:
    rho_tn: float
    p_match: float
    sigma_n: float
    sigma_o: float

    def __post_init__(self):
        vals = (self.rho_tn, self.p_match, self.sigma_n, self.sigma_o)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("inputs must be finite")
        if not 0.0 <= self.p_match <= 1.0:
            raise ValueError("p_match must lie in [0, 1]")
        if self.sigma_n <= 0 or self.sigma_o <= 0:
            raise ValueError("sigmas must be positive")


def fit_linear(x, y) -> RegressionFit:
    """Least-squares line through (x, y).

    The residual variance divides by the point count m, not m-2; the small
    bias is accepted deliberately so downstream SNR numbers follow the same
    convention everywhere.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two equal-length 1-d arrays with >= 2 points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("x is constant; slope undefined")
    yc = y - y.mean()
    beta1 = float(xc @ yc) / sxx
    beta0 = float(y.mean() - beta1 * x.mean())
    resid = y - (beta1 * x + beta0)
    sigma_eps_sq = float(resid @ resid) / x.size
    syy = float(yc @ yc)
    r_squared = 1.0 if syy == 0.0 else 1.0 - float(resid @ resid) / syy
    return RegressionFit(
        beta1=beta1,
        beta0=beta0,
        sigma_eps_sq=sigma_eps_sq,
        r_squared=r_squared,
        n_points=int(x.size),
    )


def snr(fit: RegressionFit, sigma_n_sq: float) -> SnrEstimate:
    """Signal-to-noise ratio beta1^2 * var(counts) / residual variance."""
    if sigma_n_sq < 0:
        raise ValueError("sigma_n_sq must be non-negative")
    if fit.sigma_eps_sq <= 0:
        raise ValueError("zero residual variance: SNR is unbounded")
    return SnrEstimate(
        snr=fit.beta1**2 * sigma_n_sq / fit.sigma_eps_sq,
        sigma_n_sq=float(sigma_n_sq),
        fit=fit,
    )


def _phi(z: float) -> float:
    # standard normal CDF via the C-library erf; |error| well below 1e-7
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def success_probability(rho_peak: float, rho_ave: float, samples: float) -> float:
    """Probability that the true guess's sample correlation beats a rival's.

    Both correlations go through the Fisher z-transform; their difference is
    normal with variance 2/(S-3).
    """
    if samples <= 3:
        raise ValueError("need more than 3 samples")
    if not (abs(rho_peak) < 1 and abs(rho_ave) < 1):
        raise ValueError("correlations must lie strictly inside (-1, 1)")
    z = (math.atanh(rho_peak) - math.atanh(rho_ave)) / math.sqrt(2.0 / (samples - 3.0))
    return _phi(z)


def samples_required(rho_peak: float, rho_ave: float, alpha: float) -> int:
    """Smallest integer sample count reaching the target success level."""
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (0.5, 1)")
    if not (abs(rho_peak) < 1 and abs(rho_ave) < 1):
        raise ValueError("correlations must lie strictly inside (-1, 1)")
    if rho_peak <= rho_ave:
        raise ValueError("rho_peak must exceed rho_ave for the attack to be attainable")
    lo, hi = 4, 8
    while success_probability(rho_peak, rho_ave, hi) < alpha:
        hi *= 2
        if hi > 1 << 62:
            raise OverflowError("sample requirement out of range")
    while lo < hi:
        mid = (lo + hi) // 2
        if success_probability(rho_peak, rho_ave, mid) >= alpha:
            hi = mid
        else:
            lo = mid + 1
    return lo


def attenuate_hw(rho_ideal: float, snr_value: float) -> float:
    """Correlation surviving measurement noise of a given SNR."""
    if snr_value <= 0:
        raise ValueError("snr must be positive")
    return rho_ideal / math.sqrt(1.0 + 1.0 / snr_value)


def attenuate_sw(inputs: AttenuationInputs) -> float:
    """Correlation surviving table rotation.

    With probability p_match the rotated layout produces the same
    transaction count as the attacker's model; otherwise the count is
    treated as unrelated to the time.
    """
    return inputs.rho_tn * inputs.p_match * inputs.sigma_n / inputs.sigma_o


def combined_gain(g_hw: float, g_sw: float) -> float:
    """Lower bound on the effort multiplier when both defences are applied."""
    if g_hw < 1 or g_sw < 1:
        raise ValueError("gains are multipliers relative to baseline, >= 1")
    return g_hw * g_sw
