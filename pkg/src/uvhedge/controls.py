"""Adversary feedback controls and the martingale-drift functionals.

A control is the quadruple (nu, sigma, eta, xi): implied-vol drift, spot vol,
correlated vol-of-vol and uncorrelated *squared* vol-of-vol.  The reference
control (0, Sigma, 0, 0) reproduces the recalibrated Black-Scholes belief; the
candidate control perturbs it by the leading-order worst case zeta_tilde * psi
inside a vol band, and the modified control adds a second-order vol-drift
correction nu_hat * psi^2 that makes the traded option's drift vanish exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytics import VanillaSpec
from .errors import DomainError
from .instruments import OptionSpec, traded_call_surface
from .market import ControlBox, MarketState, PenaltyWeights, VolBand
from .vgvv import _check_vega_floor, pipeline

__all__ = [
    "ControlVector", "VolBand", "ControlBox", "reference_control",
    "drift_bC", "drift_bV", "candidate_control", "modified_control", "nu_hat",
    "make_reference_feedback", "make_candidate_feedback", "make_modified_feedback",
    "psi0_search",
]


@dataclass(frozen=True)
class ControlVector:
    """One adversary control value; xi is a squared quantity and must stay >= 0."""

    nu: float
    sigma: float
    eta: float
    xi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.nu, self.sigma, self.eta, self.xi])


def reference_control(Sigma: float) -> ControlVector:
    """Recalibrated Black-Scholes belief: zero vol drift, spot vol = implied vol."""
    if Sigma <= 0.0:
        raise DomainError(f"vol must be positive, got {Sigma}")
    return ControlVector(0.0, Sigma, 0.0, 0.0)


# ---------------------------------------------------------------------------
# drift functionals
# ---------------------------------------------------------------------------

def drift_arrays(bundle, S, Sigma, ctrl, beta_vA=0.0):
    """Common quadratic drift form for either leg.

    ``bundle`` supplies the instrument partials (effective ones for the target);
    ``ctrl`` is the stacked (4, ...) control array.
    """
    nu, sigma, eta, xi = ctrl
    gamma_term = beta_vA + S * S * bundle["dSS"]
    return (
        nu * bundle["dSigma"]
        + 0.5 * gamma_term * (sigma * sigma - Sigma * Sigma)
        + sigma * eta * S * bundle["dSSigma"]
        + 0.5 * (eta * eta + xi) * bundle["dSigmaSigma"]
    )


def drift_bC_arrays(call: VanillaSpec, t, S, Sigma, ctrl) -> np.ndarray:
    b = traded_call_surface(call)(t, S, None, None, Sigma)
    return drift_arrays(
        {"dSigma": b.dSigma, "dSS": b.dSS, "dSSigma": b.dSSigma, "dSigmaSigma": b.dSigmaSigma},
        np.asarray(S, float), np.asarray(Sigma, float), ctrl)


def drift_bC(state: MarketState, ctrl: ControlVector, call: VanillaSpec) -> float:
    """Drift of the traded option's price under the control; zero iff martingale."""
    return float(drift_bC_arrays(call, state.t, state.S, state.Sigma, ctrl.as_array()))


def drift_bV_arrays(spec: OptionSpec, t, S, A, M, Sigma, ctrl) -> np.ndarray:
    from .instruments import eval_coefficient
    from .vgvv import effective_greeks_from_bundle

    b = spec.bundle(t, S, A, M, Sigma)
    g = eval_coefficient(spec.gamma, t, S, A, M)
    beta = eval_coefficient(spec.beta, t, S, A, M)
    _, curv, vanna = effective_greeks_from_bundle(b, g)
    beta_vA = beta * b.require("dA") if np.any(np.asarray(beta) != 0.0) else 0.0
    return drift_arrays(
        {"dSigma": b.dSigma, "dSS": curv, "dSSigma": vanna, "dSigmaSigma": b.dSigmaSigma},
        np.asarray(S, float), np.asarray(Sigma, float), ctrl, beta_vA=beta_vA)


def drift_bV(spec: OptionSpec, state: MarketState, ctrl: ControlVector) -> float:
    """Drift picked up by the target's recalibrated value under the control."""
    return float(drift_bV_arrays(spec, state.t, state.S, state.A, state.M, state.Sigma,
                                 ctrl.as_array()))


# ---------------------------------------------------------------------------
# candidate / modified controls
# ---------------------------------------------------------------------------

def nu_hat_arrays(call: VanillaSpec, t, S, Sigma, zeta_tilde: np.ndarray) -> np.ndarray:
    """Second-order vol-drift correction cancelling the quadratic drift remainder."""
    b = traded_call_surface(call)(t, S, None, None, Sigma)
    _check_vega_floor(b.dSigma, S, "nu_hat")
    S = np.asarray(S, float)
    st, et = zeta_tilde[1], zeta_tilde[2]
    quad = S * S * b.dSS * st * st + 2.0 * S * b.dSSigma * st * et + b.dSigmaSigma * et * et
    return -quad / (2.0 * b.dSigma)


def nu_hat(state: MarketState, zeta_tilde, call: VanillaSpec) -> float:
    zt = np.asarray(zeta_tilde, float)
    return float(nu_hat_arrays(call, state.t, state.S, state.Sigma, zt))


def _perturbed_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma, second_order: bool):
    Sigma = np.asarray(Sigma, float)
    pipe = pipeline(spec, call, weights, t, S, A, M, Sigma)
    inside = band.contains(Sigma)
    zt = pipe.zeta_tilde * np.asarray(inside, float)
    nu = zt[0] * psi
    if second_order:
        nh = nu_hat_arrays(call, t, S, Sigma, pipe.zeta_tilde) * np.asarray(inside, float)
        nu = nu + nh * psi * psi
    return np.stack(np.broadcast_arrays(
        nu,
        Sigma + zt[1] * psi,
        zt[2] * psi,
        zt[3] * psi,
    ))


def candidate_control_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma):
    return _perturbed_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma, False)


def modified_control_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma):
    return _perturbed_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma, True)


def candidate_control(spec: OptionSpec, state: MarketState, weights: PenaltyWeights,
                      band: VolBand, psi: float, call: VanillaSpec) -> ControlVector:
    """Reference plus the leading-order worst-case tilt, inside the band only."""
    arr = candidate_control_arrays(spec, call, weights, band, psi,
                                   state.t, state.S, state.A, state.M, state.Sigma)
    return ControlVector(*(float(x) for x in arr))


def modified_control(spec: OptionSpec, state: MarketState, weights: PenaltyWeights,
                     band: VolBand, psi: float, call: VanillaSpec) -> ControlVector:
    """Candidate control plus nu_hat psi^2; satisfies the drift condition exactly."""
    arr = modified_control_arrays(spec, call, weights, band, psi,
                                  state.t, state.S, state.A, state.M, state.Sigma)
    return ControlVector(*(float(x) for x in arr))


# ---------------------------------------------------------------------------
# simulator-facing feedback closures
# ---------------------------------------------------------------------------

def make_reference_feedback() -> Callable:
    def feedback(t, S, A, M, Sigma):
        Sigma = np.asarray(Sigma, float)
        zero = np.zeros_like(Sigma)
        return np.stack([zero, Sigma, zero, zero])

    return feedback


def make_candidate_feedback(spec, call, weights, band, psi) -> Callable:
    def feedback(t, S, A, M, Sigma):
        return candidate_control_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma)

    return feedback


def make_modified_feedback(spec, call, weights, band, psi) -> Callable:
    def feedback(t, S, A, M, Sigma):
        return modified_control_arrays(spec, call, weights, band, psi, t, S, A, M, Sigma)

    return feedback


# ---------------------------------------------------------------------------
# admissibility threshold
# ---------------------------------------------------------------------------

def psi0_search(spec: OptionSpec, call: VanillaSpec, weights: PenaltyWeights,
                band: VolBand, box: ControlBox, t_grid, S_grid, Sigma_grid,
                A=None, M=None, psi_hi: float = 1.0, tol: float = 1e-4):
    """Largest psi (by bisection) keeping the modified control inside the box on a grid.

    Also reports the measured sup of |nu_hat| over the grid, which is the
    operative second-order constant for this configuration.
    """
    tt, SS, GG = np.meshgrid(np.asarray(t_grid), np.asarray(S_grid), np.asarray(Sigma_grid),
                             indexing="ij")
    A_grid = np.full_like(SS, 0.0) if A is None else np.broadcast_to(A, SS.shape)
    M_grid = SS if M is None else np.broadcast_to(M, SS.shape)

    sup_nu_hat = 0.0
    for i, t in enumerate(np.asarray(t_grid)):
        pipe = pipeline(spec, call, weights, t, SS[i], A_grid[i], M_grid[i], GG[i])
        nh = nu_hat_arrays(call, t, SS[i], GG[i], pipe.zeta_tilde)
        sup_nu_hat = max(sup_nu_hat, float(np.max(np.abs(nh))))

    def admissible(psi: float) -> bool:
        for i, t in enumerate(np.asarray(t_grid)):
            ctrl = modified_control_arrays(spec, call, weights, band, psi,
                                           t, SS[i], A_grid[i], M_grid[i], GG[i])
            if not box.contains(ctrl):
                return False
        return True

    if not admissible(tol):
        return 0.0, sup_nu_hat
    lo, hi = tol, psi_hi
    if admissible(hi):
        return hi, sup_nu_hat
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return lo, sup_nu_hat
