"""Hedging targets: payoff, auxiliary-state dynamics and value surface in one object.

An :class:`OptionSpec` bundles what the rest of the package needs to know about
a (possibly exotic) option: the terminal payoff V(S, A, M), the coefficient
functions (alpha, beta, gamma, delta) driving the auxiliary state A, and a
value-surface evaluator returning a :class:`~uvhedge.analytics.GreekBundle`
(array-valued when called with arrays).

Built-in surfaces use the vectorised closed forms, which the test suite pins
against the differentiated-quadrature path of ``uvhedge.analytics`` at 1e-10;
``quadrature_surface`` exposes the slow path for user payoffs and cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import ndtr

from . import closed_form
from .analytics import GreekBundle, VanillaSpec, _atm_unit_call
from .errors import DomainError
from .quadrature import DEFAULT_NODES, LognormalQuadrature

Coefficient = Union[float, Callable]
Surface = Callable[..., GreekBundle]  # (t, S, A, M, Sigma) -> GreekBundle


def eval_coefficient(c: Coefficient, t, S, A, M):
    if callable(c):
        return c(t, S, A, M)
    return c


@dataclass(frozen=True)
class OptionSpec:
    """A non-traded option: payoff, auxiliary-state coefficients, value surface."""

    name: str
    maturity: float
    surface: Surface
    payoff: Callable  # (S, A, M) -> terminal value
    alpha: Coefficient = 0.0
    beta: Coefficient = 0.0
    gamma: Coefficient = 0.0
    delta: Coefficient = 0.0
    #: surface depends on (t, S, Sigma) only; enables the PDE route
    s_only: bool = True
    #: initial auxiliary value as a function of the initial stock price
    a0: Callable[[float], float] = field(default=lambda s0: 0.0)
    #: underlying European descriptor when the target wraps one (negation keeps it)
    vanilla: Optional[VanillaSpec] = None

    def bundle(self, t, S, A=None, M=None, Sigma=None) -> GreekBundle:
        return self.surface(t, S, A, M, Sigma)

    def coefficients(self):
        return self.alpha, self.beta, self.gamma, self.delta


def _vanilla_closed_form(spec: VanillaSpec) -> Surface:
    def surface(t, S, A, M, Sigma):
        tau = spec.maturity - t
        if np.any(np.asarray(tau) <= 0.0):
            raise DomainError(f"surface of {spec.kind} evaluated at or past maturity (t={t})")
        if spec.kind == "call":
            vals = closed_form.call_bundle(S, spec.strike, Sigma, tau)
        elif spec.kind == "put":
            vals = closed_form.put_bundle(S, spec.strike, Sigma, tau)
        elif spec.kind == "smooth-put":
            vals = closed_form.smooth_put_bundle(S, spec.strike, Sigma, tau)
        elif spec.kind == "power":
            vals = closed_form.power_bundle(S, Sigma, tau, spec.exponent)
        else:
            vals = closed_form.log_contract_bundle(S, Sigma, tau)
        return GreekBundle(*vals)

    return surface


def quadrature_surface(payoff: Callable, maturity: float, kinks=(),
                       nodes: int = DEFAULT_NODES) -> Surface:
    """Scalar-looping surface for an arbitrary terminal payoff H(S_T)."""
    quad = LognormalQuadrature(payoff, kinks, nodes=nodes)

    def surface(t, S, A, M, Sigma):
        tau = maturity - t
        S_arr, Sig_arr = np.broadcast_arrays(np.asarray(S, float), np.asarray(Sigma, float))
        if S_arr.ndim == 0:
            return GreekBundle(*quad.bundle(float(S_arr), float(Sig_arr), tau))
        cols = [quad.bundle(float(s), float(sig), tau) for s, sig in zip(S_arr.ravel(), Sig_arr.ravel())]
        arrs = [np.array(col).reshape(S_arr.shape) for col in zip(*cols)]
        return GreekBundle(*arrs)

    return surface


def vanilla_target(spec: VanillaSpec, name: Optional[str] = None) -> OptionSpec:
    """Wrap a European payoff as a hedging target (no auxiliary state)."""
    return OptionSpec(
        name=name or spec.kind,
        maturity=spec.maturity,
        surface=_vanilla_closed_form(spec),
        payoff=lambda S, A, M: spec.payoff(S),
        s_only=True,
        vanilla=spec,
    )


def traded_call_surface(spec: VanillaSpec) -> Surface:
    """Fast closed-form surface of the liquidly traded leg."""
    return _vanilla_closed_form(spec)


def forward_start_target(t_reset: float, maturity: float) -> OptionSpec:
    """Forward-start call (S_T - S_{T_reset})^+ ; A tracks the stock until the reset."""
    if not (0.0 < t_reset < maturity):
        raise DomainError(f"reset date must lie in (0, maturity), got {t_reset}")

    def gamma(t, S, A, M):
        return np.where(np.asarray(t) < t_reset, 1.0, 0.0)

    def surface(t, S, A, M, Sigma):
        S = np.asarray(S, float)
        Sigma = np.asarray(Sigma, float)
        if t >= t_reset:
            A = np.asarray(A, float)
            vals = closed_form.call_bundle(S, A, Sigma, maturity - t)
            sd = Sigma * math.sqrt(maturity - t)
            d1 = np.log(S / A) / sd + 0.5 * sd
            d2 = d1 - sd
            pdf2 = np.exp(-0.5 * d2 * d2) / math.sqrt(2.0 * math.pi)
            return GreekBundle(*vals, dA=-ndtr(d2), dSA=-pdf2 / (S * sd),
                               dAA=pdf2 / (A * sd), dASigma=pdf2 * d1 / Sigma)
        # before the reset: value S*c1(Sigma), linear in S with A pinned to S
        if np.ndim(Sigma) == 0:
            c1, dc1, d2c1, _, _ = _atm_unit_call(float(Sigma), maturity - t_reset)
        else:
            cols = [_atm_unit_call(float(s), maturity - t_reset)[:3] for s in np.ravel(Sigma)]
            c1, dc1, d2c1 = (np.array(col).reshape(np.shape(Sigma)) for col in zip(*cols))
        zero = np.zeros(np.broadcast(S, Sigma).shape) if np.ndim(S) or np.ndim(Sigma) else 0.0
        return GreekBundle(value=S * c1, dS=c1 + zero, dSS=zero, dSigma=S * dc1,
                           dSSigma=dc1 + zero, dSigmaSigma=S * d2c1,
                           dA=zero, dSA=zero, dAA=zero, dASigma=zero)

    return OptionSpec(
        name="forward-start",
        maturity=maturity,
        surface=surface,
        payoff=lambda S, A, M: np.maximum(np.asarray(S, float) - np.asarray(A, float), 0.0),
        gamma=gamma,
        s_only=False,
        a0=lambda s0: s0,
    )


def negate(spec: OptionSpec) -> OptionSpec:
    """The short position: -V as a target (buyer's side of the premium asymmetry)."""

    def surface(t, S, A, M, Sigma):
        b = spec.surface(t, S, A, M, Sigma)
        flip = lambda x: None if x is None else -x
        return GreekBundle(-b.value, -b.dS, -b.dSS, -b.dSigma, -b.dSSigma, -b.dSigmaSigma,
                           flip(b.dA), flip(b.dSA), flip(b.dAA), flip(b.dASigma))

    return replace(spec, name=f"-({spec.name})", surface=surface,
                   payoff=lambda S, A, M: -spec.payoff(S, A, M))


def synthetic_target(name: str, maturity: float, surface: Surface,
                     payoff: Callable = None, s_only: bool = True, **coeffs) -> OptionSpec:
    """Assemble a target from a hand-written surface (test instrumentation)."""
    return OptionSpec(
        name=name,
        maturity=maturity,
        surface=surface,
        payoff=payoff or (lambda S, A, M: np.zeros_like(np.asarray(S, float))),
        s_only=s_only,
        **coeffs,
    )


def builtin_target(kind: str, maturity: float, strike: Optional[float] = None,
                   exponent: float = 0.5, t_reset: Optional[float] = None) -> OptionSpec:
    """Factory behind the CLI/service target block."""
    if kind == "forward-start":
        if t_reset is None:
            raise DomainError("forward-start target requires t_reset")
        return forward_start_target(t_reset, maturity)
    return vanilla_target(VanillaSpec(kind, maturity=maturity, strike=strike, exponent=exponent))
