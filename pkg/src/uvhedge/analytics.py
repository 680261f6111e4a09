"""Black-Scholes values and sensitivities for the traded call and built-in payoffs.

The primary computation path is differentiated fixed-node quadrature
(``uvhedge.quadrature``); the closed forms in ``uvhedge.closed_form`` are kept
strictly as a cross-check.  Everything here is a pure function of its
arguments and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import closed_form
from .errors import CapabilityError, DomainError
from .market import MarketState
from .quadrature import DEFAULT_NODES, LognormalQuadrature

VANILLA_KINDS = ("call", "put", "smooth-put", "power", "log-contract")


@dataclass(frozen=True)
class VanillaSpec:
    """A European payoff on the terminal stock price.

    ``strike`` is required for call/put/smooth-put and ignored for the
    log-contract; ``exponent`` only applies to the power payoff.
    """

    kind: str
    maturity: float
    strike: Optional[float] = None
    exponent: float = 0.5

    def __post_init__(self):
        if self.kind not in VANILLA_KINDS:
            raise DomainError(f"unknown payoff kind {self.kind!r}; expected one of {VANILLA_KINDS}")
        if self.maturity <= 0.0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if self.kind in ("call", "put", "smooth-put"):
            if self.strike is None or self.strike <= 0.0:
                raise DomainError(f"{self.kind} requires a positive strike, got {self.strike}")

    def payoff(self, y):
        """Terminal payoff as a vectorised function of the terminal price."""
        y = np.asarray(y, float)
        if self.kind == "call":
            return np.maximum(y - self.strike, 0.0)
        if self.kind == "put":
            return np.maximum(self.strike - y, 0.0)
        if self.kind == "smooth-put":
            return closed_form.smooth_put_payoff(y, self.strike)
        if self.kind == "power":
            return y ** self.exponent
        return np.log(y)

    def kinks(self) -> tuple:
        """Terminal prices where the payoff has a kink or a sharp smoothed feature."""
        if self.kind in ("call", "put", "smooth-put"):
            return (self.strike,)
        return ()


@dataclass(frozen=True)
class GreekBundle:
    """Value and partial derivatives of a value function at (t, S, Sigma).

    The four optional entries carry auxiliary-state sensitivities for payoffs
    whose value surface depends on the extra state variable; they stay ``None``
    for plain terminal-price payoffs.
    """

    value: float
    dS: float
    dSS: float
    dSigma: float
    dSSigma: float
    dSigmaSigma: float
    dA: Optional[float] = None
    dSA: Optional[float] = None
    dAA: Optional[float] = None
    dASigma: Optional[float] = None

    def require(self, name: str) -> float:
        v = getattr(self, name)
        if v is None:
            raise CapabilityError(f"value surface does not provide {name}", missing=name)
        return v

    def as_array(self):
        return np.array([self.value, self.dS, self.dSS, self.dSigma, self.dSSigma, self.dSigmaSigma])


def _quadrature_for(spec: VanillaSpec, nodes: int) -> LognormalQuadrature:
    return LognormalQuadrature(spec.payoff, spec.kinks(), nodes=nodes)


def european_value(spec: VanillaSpec, t: float, S: float, Sigma: float,
                   nodes: int = DEFAULT_NODES) -> float:
    """Quadrature value of a built-in European payoff at (t, S, Sigma).

    At or past maturity the intrinsic payoff is returned (not an error); the
    hedging theory only ever evaluates strictly before maturity.
    """
    if S <= 0.0 or Sigma <= 0.0:
        raise DomainError(f"need S > 0 and Sigma > 0, got S={S}, Sigma={Sigma}")
    tau = spec.maturity - t
    if tau <= 0.0:
        return float(spec.payoff(S))
    return _quadrature_for(spec, nodes).value(S, Sigma, tau)


def european_greeks(spec: VanillaSpec, t: float, S: float, Sigma: float,
                    nodes: int = DEFAULT_NODES) -> GreekBundle:
    """Full bundle by differentiated quadrature; requires t strictly before maturity."""
    if S <= 0.0 or Sigma <= 0.0:
        raise DomainError(f"need S > 0 and Sigma > 0, got S={S}, Sigma={Sigma}")
    tau = spec.maturity - t
    if tau <= 0.0:
        raise DomainError(
            f"greeks need t < maturity (t={t}, maturity={spec.maturity}); value is not differentiable at expiry"
        )
    vals = _quadrature_for(spec, nodes).bundle(S, Sigma, tau)
    return GreekBundle(*vals)


def _atm_unit_call(Sigma: float, tau: float):
    """Value/derivatives in Sigma of an at-the-money call on one unit of stock."""
    half_sd = 0.5 * Sigma * math.sqrt(tau)
    pdf = math.exp(-0.5 * half_sd * half_sd) / math.sqrt(2.0 * math.pi)
    c1 = 2.0 * _ndtr(half_sd) - 1.0
    dc1 = math.sqrt(tau) * pdf
    d2c1 = -0.5 * tau * half_sd * pdf  # d/dSigma of dc1; phi'(x) = -x phi(x)
    return c1, dc1, d2c1, half_sd, pdf


def _ndtr(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def forward_start_value(t: float, S: float, A: float, Sigma: float,
                        T_reset: float, T: float) -> GreekBundle:
    """Bundle of a forward-start call (S_T - S_{T_reset})^+ with reset value tracked in A.

    After the reset the strike is frozen at A and the bundle is an ordinary
    call with strike sensitivities in the auxiliary slots.  Before the reset the
    reset value co-moves with the stock (A is pinned to S along the flow), so
    the value surface restricted to that manifold is S times an at-the-money
    unit call over [T_reset, T]: linear in S, with vanishing convexity.  The
    bundle differentiates that representation; the auxiliary slots are zero
    because A carries no independent information before the reset.
    """
    if not (0.0 < T_reset < T):
        raise DomainError(f"reset date must lie in (0, maturity), got T_reset={T_reset}, T={T}")
    if t >= T:
        raise DomainError(f"need t < maturity, got t={t}, T={T}")
    if S <= 0.0 or A <= 0.0 or Sigma <= 0.0:
        raise DomainError("need positive S, A, Sigma")

    if t >= T_reset:
        b = european_greeks(VanillaSpec("call", maturity=T, strike=A), t, S, Sigma)
        sd = Sigma * math.sqrt(T - t)
        d1 = math.log(S / A) / sd + 0.5 * sd
        d2 = d1 - sd
        pdf2 = math.exp(-0.5 * d2 * d2) / math.sqrt(2.0 * math.pi)
        return replace(
            b,
            dA=-_ndtr(d2),
            dSA=-pdf2 / (S * sd),
            dAA=pdf2 / (A * sd),
            dASigma=pdf2 * d1 / Sigma,
        )

    tau2 = T - T_reset
    c1, dc1, d2c1, _, _ = _atm_unit_call(Sigma, tau2)
    return GreekBundle(
        value=S * c1,
        dS=c1,
        dSS=0.0,
        dSigma=S * dc1,
        dSSigma=dc1,
        dSigmaSigma=S * d2c1,
        dA=0.0,
        dSA=0.0,
        dAA=0.0,
        dASigma=0.0,
    )


def pde_residual(surface, coefficients, point: MarketState, dt: float = 1e-5,
                 dA: Optional[float] = None) -> float:
    """Signed residual of the valuation PDE at an interior state.

    ``surface`` maps (t, S, A, M, Sigma) -> GreekBundle; ``coefficients`` is the
    (alpha, beta, gamma, delta) quadruple of the auxiliary-state dynamics, each
    a float or a callable of (t, S, A, M).  The time derivative is always taken
    by central differences; auxiliary-state second derivatives fall back to
    finite differences when the bundle does not carry them.  Diagnostic only:
    production paths never call this.
    """
    alpha, beta, gamma, delta = (_coeff(c, point) for c in coefficients)
    t, S, A, M, Sigma = point.t, point.S, point.A, point.M, point.Sigma
    b = surface(t, S, A, M, Sigma)

    v_plus = surface(t + dt, S, A, M, Sigma).value
    v_minus = surface(t - dt, S, A, M, Sigma).value
    v_t = (v_plus - v_minus) / (2.0 * dt)

    needs_a = (alpha != 0.0) or (beta != 0.0) or (gamma != 0.0)
    if needs_a:
        v_a = b.dA
        v_sa = b.dSA
        v_aa = b.dAA
        if v_a is None or v_sa is None or v_aa is None:
            h = dA if dA is not None else 1e-4 * max(abs(A), 1.0)
            up = surface(t, S, A + h, M, Sigma)
            dn = surface(t, S, A - h, M, Sigma)
            if v_a is None:
                v_a = (up.value - dn.value) / (2.0 * h)
            if v_aa is None:
                v_aa = (up.value - 2.0 * b.value + dn.value) / (h * h)
            if v_sa is None:
                v_sa = (up.dS - dn.dS) / (2.0 * h)
    else:
        v_a = v_sa = v_aa = 0.0

    diffusion = b.dSS + 2.0 * gamma * v_sa + gamma * gamma * v_aa
    return v_t + (alpha + 0.5 * beta * Sigma * Sigma) * v_a + 0.5 * Sigma * Sigma * S * S * diffusion


def _coeff(c, point: MarketState) -> float:
    if callable(c):
        return float(c(point.t, point.S, point.A, point.M))
    return float(c)
