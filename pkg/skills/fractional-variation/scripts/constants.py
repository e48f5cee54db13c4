#!/usr/bin/env python3
"""
分数阶常数
Closed-form constants for fractional Brownian motion and fractional martingales

All functions are pure; H = 1/2 + alpha links the two parametrizations.

- beta_of_alpha: critical variation order 2/(1+2α) = 1/H
- kappa: normalizing constant of the Volterra kernel
- c_h: E|ξ|^{1/H}, ξ standard normal
- c_alpha: β-variation constant of the Riemann–Liouville transform of BM
- d_h: constant of the reconstruction formula, 1/B(3/2−H, H+1/2)
"""

import math

import numpy as np
from scipy import special

from errors import DomainError


def check_hurst(h: float) -> float:
    h = float(h)
    if not 0.0 < h < 1.0 or math.isnan(h):
        raise DomainError(f"Hurst exponent must lie in (0, 1), got {h}")
    return h


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not -0.5 < alpha < 0.5 or math.isnan(alpha):
        raise DomainError(f"Fractional order alpha must lie in (-1/2, 1/2), got {alpha}")
    return alpha


def beta_of_alpha(alpha: float) -> float:
    """Critical variation order β = 2/(1+2α)."""
    alpha = check_alpha(alpha)
    return 2.0 / (1.0 + 2.0 * alpha)


def kappa(h: float) -> float:
    """κ_H = sqrt(2H Γ(3/2−H) / (Γ(H+1/2) Γ(2−2H)))."""
    h = check_hurst(h)
    if h == 0.5:
        return 1.0
    log_k2 = (math.log(2.0 * h) + special.gammaln(1.5 - h)
              - special.gammaln(h + 0.5) - special.gammaln(2.0 - 2.0 * h))
    return float(math.exp(0.5 * log_k2))


def gaussian_abs_moment(p: float) -> float:
    """E|ξ|^p = 2^{p/2} Γ((p+1)/2) / √π for ξ ~ N(0, 1), p > −1."""
    p = float(p)
    if not p > -1.0:
        raise DomainError(f"Absolute moment order must exceed -1, got {p}")
    if p == 2.0:
        return 1.0
    log_m = 0.5 * p * math.log(2.0) + special.gammaln(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi)
    return float(math.exp(log_m))


def c_h(h: float) -> float:
    """c_H = E|ξ|^{1/H}."""
    h = check_hurst(h)
    return gaussian_abs_moment(1.0 / h)


def c_alpha(alpha: float) -> float:
    """c_α = c_H κ_H^{−1/H} with H = 1/2 + α."""
    alpha = check_alpha(alpha)
    h = 0.5 + alpha
    return c_h(h) * kappa(h) ** (-1.0 / h)


def d_h(h: float) -> float:
    """d_H = 1 / B(3/2−H, H+1/2)."""
    h = check_hurst(h)
    if h == 0.5:
        return 1.0
    return float(1.0 / special.beta(1.5 - h, h + 0.5))


def qv_reference(h: float, t) -> np.ndarray:
    """E⟨M⟩_t = (κ_H/d_H)² t^{2−2H}/(2−2H) for the fundamental martingale."""
    h = check_hurst(h)
    t = np.asarray(t, dtype=float)
    scale = (kappa(h) / d_h(h)) ** 2
    return scale * t ** (2.0 - 2.0 * h) / (2.0 - 2.0 * h)


def fbm_covariance(s, t, h: float) -> np.ndarray:
    """½(t^{2H} + s^{2H} − |t−s|^{2H})."""
    h = check_hurst(h)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    two_h = 2.0 * h
    return 0.5 * (t ** two_h + s ** two_h - np.abs(t - s) ** two_h)


def all_constants(h: float) -> dict:
    """所有常数 (CLI 输出用)"""
    h = check_hurst(h)
    alpha = h - 0.5
    return {
        'hurst': h,
        'alpha': alpha,
        'beta': beta_of_alpha(alpha),
        'kappa': kappa(h),
        'c_h': c_h(h),
        'c_alpha': c_alpha(alpha),
        'd_h': d_h(h),
    }
