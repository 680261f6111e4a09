"""Closed-form Black-Scholes values and sensitivities (zero rate, zero dividend).

These formulas serve as the independent cross-check for the quadrature engine
and as the fast vectorised path used inside Monte Carlo loops.  All functions
broadcast over numpy arrays.

The returned tuple is always (value, dS, dSS, dSigma, dSSigma, dSigmaSigma).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

_SQRT_2PI = np.sqrt(2.0 * np.pi)

#: residual maturity of the built-in smoothed put payoff (years)
SMOOTH_PUT_EPS = 0.01
#: fixed vol used inside the smoothed put payoff; the payoff must not depend on
#: the pricing vol, otherwise it would not be a terminal condition
SMOOTH_PUT_VOL = 0.2


def _pdf(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _d12(S, K, sd):
    d1 = np.log(S / K) / sd + 0.5 * sd
    return d1, d1 - sd


def call_bundle(S, K, Sigma, tau):
    """European call (S-K)^+ ; classic formulas."""
    S, Sigma = np.asarray(S, float), np.asarray(Sigma, float)
    sd = Sigma * np.sqrt(tau)
    d1, d2 = _d12(S, K, sd)
    pdf = _pdf(d1)
    value = S * ndtr(d1) - K * ndtr(d2)
    dS = ndtr(d1)
    dSS = pdf / (S * sd)
    dSigma = S * pdf * np.sqrt(tau)
    dSSigma = -pdf * d2 / Sigma
    dSigmaSigma = S * pdf * np.sqrt(tau) * d1 * d2 / Sigma
    return value, dS, dSS, dSigma, dSSigma, dSigmaSigma


def put_bundle(S, K, Sigma, tau):
    """European put (K-S)^+ ; shares all second-order greeks with the call."""
    value_c, dS_c, dSS, dSigma, dSSigma, dSigmaSigma = call_bundle(S, K, Sigma, tau)
    return value_c - S + K, dS_c - 1.0, dSS, dSigma, dSSigma, dSigmaSigma


def _put_total_variance(S, K, total_var):
    """Put value and partials w.r.t. (S, sqrt(total_var))."""
    sv = np.sqrt(total_var)
    d1, d2 = _d12(S, K, sv)
    pdf = _pdf(d1)
    value = K * ndtr(-d2) - S * ndtr(-d1)
    dS = ndtr(d1) - 1.0
    dSS = pdf / (S * sv)
    dv = S * pdf                      # d/d(sv)
    dSv = -pdf * d2 / sv              # d2/dS d(sv)
    dvv = S * pdf * d1 * d2 / sv      # d2/d(sv)^2
    return value, dS, dSS, dv, dSv, dvv


def smooth_put_bundle(S, K, Sigma, tau, eps=SMOOTH_PUT_EPS, eps_vol=SMOOTH_PUT_VOL):
    """Option paying the Black-Scholes put value with residual maturity ``eps``.

    Valuing that payoff under a lognormal with variance Sigma^2*tau convolves
    two Gaussians, so the value is a put with total variance
    Sigma^2*tau + eps_vol^2*eps; Sigma-derivatives follow by the chain rule.
    """
    S, Sigma = np.asarray(S, float), np.asarray(Sigma, float)
    total_var = Sigma * Sigma * tau + eps_vol * eps_vol * eps
    sv = np.sqrt(total_var)
    value, dS, dSS, dv, dSv, dvv = _put_total_variance(S, K, total_var)
    dsv = Sigma * tau / sv                       # d(sv)/dSigma
    d2sv = tau / sv - (Sigma * tau) ** 2 / sv ** 3
    return value, dS, dSS, dv * dsv, dSv * dsv, dvv * dsv * dsv + dv * d2sv


def smooth_put_payoff(y, K, eps=SMOOTH_PUT_EPS, eps_vol=SMOOTH_PUT_VOL):
    """Terminal payoff of the smoothed put (a fixed smooth function of price)."""
    v, *_ = _put_total_variance(np.asarray(y, float), K, eps_vol * eps_vol * eps)
    return v


def power_bundle(S, Sigma, tau, p):
    """Power payoff S^p; value S^p * exp(p(p-1) Sigma^2 tau / 2)."""
    S, Sigma = np.asarray(S, float), np.asarray(Sigma, float)
    q = 0.5 * p * (p - 1.0)
    f = np.exp(q * Sigma * Sigma * tau)
    value = S ** p * f
    dS = p * value / S
    dSS = p * (p - 1.0) * value / (S * S)
    dSigma = value * 2.0 * q * Sigma * tau
    dSSigma = dS * 2.0 * q * Sigma * tau
    dSigmaSigma = value * (2.0 * q * tau + (2.0 * q * Sigma * tau) ** 2)
    return value, dS, dSS, dSigma, dSSigma, dSigmaSigma


def log_contract_bundle(S, Sigma, tau):
    """Log-contract ln(S_T); value ln S - Sigma^2 tau / 2."""
    S, Sigma = np.asarray(S, float), np.asarray(Sigma, float)
    ones = np.ones(np.broadcast(S, Sigma).shape) if np.broadcast(S, Sigma).shape else 1.0
    value = (np.log(S) - 0.5 * Sigma * Sigma * tau) * ones
    return value, ones / S, -ones / (S * S), -Sigma * tau * ones, 0.0 * ones, -tau * ones
