"""Vega-gamma-vanna-volga vectors, Lagrange pair, worst-case perturbation, source term.

The adversary's leading-order problem is the diagonal QP of ``uvhedge.lcqp``
specialised to n = 4 with D the inverse penalty diagonal: minimise the penalty
minus the drift impact subject to the linearised martingale constraint c'z = 0
and the sign constraint on the squared vol-of-vol coordinate.  Everything here
is written against that specialisation, with the traded option's 4-vector c and
the target's 4-vector v:

    c = (C_Sigma, Sigma S^2 C_SS, Sigma S C_SSigma, C_SigmaSigma / 2)
    v = (V_Sigma, Sigma (beta V_A + S^2 Gamma_eff), Sigma S vanna_eff, V_SigmaSigma / 2)

All kernels broadcast over numpy arrays; the dataclass facades mirror them for
single states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import analytics
from .analytics import GreekBundle, VanillaSpec
from .errors import CapabilityError, DegenerateVegaError, InvariantError
from .instruments import OptionSpec, eval_coefficient, traded_call_surface
from .market import MarketState, PenaltyWeights

#: relative vega floor: |C_Sigma| below this multiple of S counts as degenerate
VEGA_FLOOR_REL = 1e-10


@dataclass(frozen=True)
class VgvvVector:
    """(vega, cash-gamma term, cash-vanna term, half-volga) of one instrument."""

    v1: float
    v2: float
    v3: float
    v4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2, self.v3, self.v4])

    @staticmethod
    def from_array(a) -> "VgvvVector":
        return VgvvVector(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


# ---------------------------------------------------------------------------
# effective greeks
# ---------------------------------------------------------------------------

def effective_greeks_from_bundle(b: GreekBundle, gamma_coeff):
    """(delta, gamma, vanna) with the auxiliary state co-moving at rate gamma."""
    g = np.asarray(gamma_coeff, float)
    if np.any(g != 0.0):
        dA = b.require("dA")
        dSA = b.require("dSA")
        dAA = b.require("dAA")
        dASigma = b.require("dASigma")
        delta = b.dS + g * dA
        curv = b.dSS + 2.0 * g * dSA + g * g * dAA
        vanna = b.dSSigma + g * dASigma
        return delta, curv, vanna
    return b.dS, b.dSS, b.dSSigma


def effective_greeks(spec: OptionSpec, state: MarketState):
    """Effective delta, gamma and vanna of the target at one state."""
    b = spec.bundle(state.t, state.S, state.A, state.M, state.Sigma)
    g = eval_coefficient(spec.gamma, state.t, state.S, state.A, state.M)
    delta, curv, vanna = effective_greeks_from_bundle(b, g)
    return float(delta), float(curv), float(vanna)


# ---------------------------------------------------------------------------
# the two 4-vectors
# ---------------------------------------------------------------------------

def _check_vega_floor(vega, S, where: str):
    bad = np.abs(vega) < VEGA_FLOOR_REL * np.abs(S)
    if np.any(bad):
        idx = np.argmax(np.atleast_1d(bad))
        s_bad = np.atleast_1d(np.broadcast_arrays(S, vega)[0])[idx]
        v_bad = np.atleast_1d(np.broadcast_arrays(S, vega)[1])[idx]
        raise DegenerateVegaError(
            f"{where}: traded-option vega {v_bad:.3e} below floor {VEGA_FLOOR_REL:.0e}*S at S={s_bad:.6g}"
        )


def vgvv_from_bundle(b: GreekBundle, S, Sigma, beta=0.0, gamma_coeff=0.0):
    """Stack the 4-vector from a bundle; beta couples the auxiliary drift into v2."""
    _, curv, vanna = effective_greeks_from_bundle(b, gamma_coeff)
    beta = np.asarray(beta, float)
    if np.any(beta != 0.0):
        a_term = beta * b.require("dA")
    else:
        a_term = 0.0
    return np.stack(np.broadcast_arrays(
        b.dSigma,
        Sigma * (a_term + S * S * curv),
        Sigma * S * vanna,
        0.5 * b.dSigmaSigma,
    ))


def call_vgvv_arrays(call: VanillaSpec, t, S, Sigma) -> np.ndarray:
    """Traded-leg 4-vector on arrays via the fast surface."""
    b = traded_call_surface(call)(t, S, None, None, Sigma)
    _check_vega_floor(b.dSigma, S, "call_vgvv")
    return vgvv_from_bundle(b, np.asarray(S, float), np.asarray(Sigma, float))


def call_vgvv(state: MarketState, call: VanillaSpec) -> VgvvVector:
    """Traded-leg 4-vector at one state, partials from the quadrature path."""
    b = analytics.european_greeks(call, state.t, state.S, state.Sigma)
    _check_vega_floor(b.dSigma, state.S, "call_vgvv")
    return VgvvVector.from_array(vgvv_from_bundle(b, state.S, state.Sigma))


def option_vgvv_arrays(spec: OptionSpec, t, S, A, M, Sigma) -> np.ndarray:
    b = spec.bundle(t, S, A, M, Sigma)
    beta = eval_coefficient(spec.beta, t, S, A, M)
    g = eval_coefficient(spec.gamma, t, S, A, M)
    return vgvv_from_bundle(b, np.asarray(S, float), np.asarray(Sigma, float), beta, g)


def option_vgvv(spec: OptionSpec, state: MarketState) -> VgvvVector:
    arr = option_vgvv_arrays(spec, state.t, state.S, state.A, state.M, state.Sigma)
    return VgvvVector.from_array(arr)


# ---------------------------------------------------------------------------
# Lagrange pair, perturbation, source term
# ---------------------------------------------------------------------------

def lagrange_arrays(c: np.ndarray, v: np.ndarray, weights: PenaltyWeights,
                    degenerate: str = "raise"):
    """Multiplier pair (lam, mu) of the linearised worst-case QP, elementwise.

    Branch 1 is the plain weighted projection; branch 2 prices in the active
    sign constraint on the fourth coordinate.  Ties stay on branch 1 (the two
    expressions coincide at the boundary).

    ``degenerate`` controls states where c has underflowed to zero in every
    component (deep wings an instant before expiry): "raise" rejects them,
    "zero" returns lam = mu = 0 there provided v is dead as well, which keeps
    the source term exactly zero where both legs have no vol sensitivity left.
    """
    w = weights.diagonal().reshape((4,) + (1,) * (c.ndim - 1))
    cWc = np.sum(c * w * c, axis=0)
    cWv = np.sum(c * w * v, axis=0)
    dead = cWc == 0.0
    if np.any(dead):
        if degenerate != "zero":
            raise CapabilityError("lagrange pair needs a nonzero entry among the first three call components")
        if np.any(dead & (np.sum(v * w * v, axis=0) != 0.0)):
            raise DegenerateVegaError(
                "target keeps vol sensitivity where the traded option has none; worst case unbounded"
            )
    elif not np.all(np.any(np.abs(c[:3]) > 0.0, axis=0)):
        raise CapabilityError("lagrange pair needs a nonzero entry among the first three call components")
    safe_cWc = np.where(dead, 1.0, cWc)
    lam1 = cWv / safe_cWc
    active = (v[3] - lam1 * c[3]) < 0.0
    den2 = cWc - weights.psi_xi * c[3] ** 2
    if np.any(active & (den2 <= 0.0) & ~dead):
        raise InvariantError("branch-2 denominator not positive; first-three precondition violated")
    lam2 = (cWv - weights.psi_xi * c[3] * v[3]) / np.where(den2 > 0.0, den2, 1.0)
    lam = np.where(active, lam2, lam1)
    mu = np.maximum(-(v[3] - lam * c[3]), 0.0)
    return lam, mu


def zeta_tilde_arrays(c: np.ndarray, v: np.ndarray, weights: PenaltyWeights) -> np.ndarray:
    """Leading-order worst-case perturbation: Psi (v - lam c + mu e4)."""
    lam, mu = lagrange_arrays(c, v, weights)
    w = weights.diagonal().reshape((4,) + (1,) * (c.ndim - 1))
    r = v - lam * c  # fresh array; safe to write the lifted fourth row
    r[3] = r[3] + mu
    return w * r


def source_term_arrays(c: np.ndarray, v: np.ndarray, weights: PenaltyWeights) -> np.ndarray:
    """Nonnegative source g = v' zeta_tilde feeding the cash-equivalent PDE."""
    zt = zeta_tilde_arrays(c, v, weights)
    return np.sum(v * zt, axis=0)


def lagrange_pair(c: VgvvVector, v: VgvvVector, weights: PenaltyWeights):
    lam, mu = lagrange_arrays(c.as_array(), v.as_array(), weights)
    return float(lam), float(mu)


def zeta_tilde(c: VgvvVector, v: VgvvVector, weights: PenaltyWeights) -> np.ndarray:
    return zeta_tilde_arrays(c.as_array(), v.as_array(), weights)


def source_term(c: VgvvVector, v: VgvvVector, weights: PenaltyWeights) -> float:
    return float(source_term_arrays(c.as_array(), v.as_array(), weights))


class Pipeline(NamedTuple):
    """Everything the controls/premium layers need at a batch of states."""

    c: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    zeta_tilde: np.ndarray
    source: np.ndarray
    call_bundle: GreekBundle
    target_bundle: GreekBundle


def pipeline(spec: OptionSpec, call: VanillaSpec, weights: PenaltyWeights,
             t, S, A, M, Sigma, degenerate: str = "raise") -> Pipeline:
    """One-pass evaluation of c, v, (lam, mu), zeta_tilde and the source term.

    ``degenerate="zero"`` is for source-term sweeps that never divide by the
    traded option's vega (no hedge ratio involved); it skips the vega floor and
    zeroes states where both legs have underflowed, see
    :func:`lagrange_arrays`.
    """
    cb = traded_call_surface(call)(t, S, None, None, Sigma)
    if degenerate == "raise":
        _check_vega_floor(cb.dSigma, S, "pipeline")
    S_arr = np.asarray(S, float)
    Sig_arr = np.asarray(Sigma, float)
    c = vgvv_from_bundle(cb, S_arr, Sig_arr)
    tb = spec.bundle(t, S, A, M, Sigma)
    beta = eval_coefficient(spec.beta, t, S, A, M)
    g = eval_coefficient(spec.gamma, t, S, A, M)
    v = vgvv_from_bundle(tb, S_arr, Sig_arr, beta, g)
    lam, mu = lagrange_arrays(c, v, weights, degenerate=degenerate)
    w = weights.diagonal().reshape((4,) + (1,) * (c.ndim - 1))
    r = v - lam * c
    r[3] = r[3] + mu
    zt = w * r
    src = np.sum(v * zt, axis=0)
    return Pipeline(c=c, v=v, lam=lam, mu=mu, zeta_tilde=zt, source=src,
                    call_bundle=cb, target_bundle=tb)
