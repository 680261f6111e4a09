"""Values and greeks of the built-in payoffs.

Expected numbers come from the closed forms in ``uvhedge.closed_form`` (an
independent implementation of the same quantities) or from finite differences
of the quadrature value itself; the quadrature path never checks against its
own output.
"""

import math

import numpy as np
import pytest

from uvhedge import DomainError, MarketState, VanillaSpec, european_greeks, european_value, forward_start_value, pde_residual
from uvhedge import closed_form
from uvhedge.analytics import GreekBundle
from uvhedge.errors import CapabilityError
from uvhedge.instruments import forward_start_target, traded_call_surface

ATM = VanillaSpec("call", maturity=1.0, strike=100.0)


def test_atm_call_value_matches_closed_form_oracle():
    # frozen from the closed-form oracle: 100*(2*N(0.1)-1)
    assert european_value(ATM, 0.0, 100.0, 0.2) == pytest.approx(7.965567455405804, abs=1e-10)


def test_call_value_agrees_with_closed_form_everywhere():
    for K in (60.0, 100.0, 145.0):
        spec = VanillaSpec("call", maturity=1.0, strike=K)
        for S in (70.0, 100.0, 130.0):
            for sig in (0.1, 0.2, 0.45):
                cf = closed_form.call_bundle(S, K, sig, 1.0)[0]
                assert european_value(spec, 0.0, S, sig) == pytest.approx(float(cf), rel=1e-10)


def test_intrinsic_at_and_past_maturity():
    assert european_value(ATM, 1.0, 120.0, 0.2) == pytest.approx(20.0)
    assert european_value(ATM, 1.5, 120.0, 0.7) == pytest.approx(20.0)
    with pytest.raises(DomainError):
        european_greeks(ATM, 1.0, 120.0, 0.2)


def test_log_contract_value_and_greeks():
    spec = VanillaSpec("log-contract", maturity=2.0)
    assert european_value(spec, 0.0, 100.0, 0.2) == pytest.approx(math.log(100.0) - 0.04, abs=1e-12)
    b = european_greeks(spec, 0.0, 100.0, 0.2)
    # dSigma = -Sigma * (maturity - t) = -0.2 * 2
    assert b.dSigma == pytest.approx(-0.4, abs=1e-10)
    assert b.dSS == pytest.approx(-1e-4, rel=1e-9)
    assert b.dSigmaSigma == pytest.approx(-2.0, rel=1e-9)


def test_atm_vega_matches_closed_form():
    b = european_greeks(ATM, 0.0, 100.0, 0.2)
    assert b.dSigma == pytest.approx(100.0 * math.exp(-0.005) / math.sqrt(2 * math.pi), rel=1e-12)
    assert b.dSigma == pytest.approx(39.6952547477, abs=1e-6)


def test_put_call_parity_exact():
    for S in (80.0, 100.0, 125.0):
        for sig in (0.15, 0.3):
            for t in (0.0, 0.7):
                call = european_value(VanillaSpec("call", 1.0, 100.0), t, S, sig)
                put = european_value(VanillaSpec("put", 1.0, 100.0), t, S, sig)
                assert call - put == pytest.approx(S - 100.0, abs=1e-12 * max(S, 100.0))


def test_domain_errors():
    with pytest.raises(DomainError):
        european_value(ATM, 0.0, -5.0, 0.2)
    with pytest.raises(DomainError):
        european_value(ATM, 0.0, 100.0, 0.0)
    with pytest.raises(DomainError):
        VanillaSpec("call", maturity=1.0)  # missing strike
    with pytest.raises(DomainError):
        VanillaSpec("straddle", maturity=1.0, strike=1.0)


def _richardson(d):
    """(4 D(h/2) - D(h)) / 3: kills the h^2 truncation term of a central difference."""
    return (4.0 * d(0.5) - d(1.0)) / 3.0


def _fd_check(spec, t, S, sig):
    """Central differences of the quadrature value; independent of the weights path.

    First derivatives use the plain h = 1e-4 * scale rule; second derivatives
    use wider Richardson-extrapolated stencils because the /h^2 amplification
    of the quadrature's own 1e-15 noise dominates at narrow steps.
    """
    b = european_greeks(spec, t, S, sig)
    v = lambda s, g: european_value(spec, t, s, g)
    hS, hv = 1e-4 * S, 1e-4 * sig
    HS, HV = 5e-3 * S, 5e-3 * sig
    fd = {
        "dS": (v(S + hS, sig) - v(S - hS, sig)) / (2 * hS),
        "dSigma": (v(S, sig + hv) - v(S, sig - hv)) / (2 * hv),
        "dSS": _richardson(lambda c: (v(S + c * HS, sig) - 2 * v(S, sig) + v(S - c * HS, sig))
                           / (c * HS) ** 2),
        "dSigmaSigma": _richardson(lambda c: (v(S, sig + c * HV) - 2 * v(S, sig)
                                              + v(S, sig - c * HV)) / (c * HV) ** 2),
        "dSSigma": _richardson(lambda c: (v(S + c * HS, sig + c * HV) - v(S + c * HS, sig - c * HV)
                                          - v(S - c * HS, sig + c * HV) + v(S - c * HS, sig - c * HV))
                               / (4 * c * c * HS * HV)),
    }
    return b, fd


@pytest.mark.parametrize("kind", ["call", "put", "smooth-put", "power", "log-contract"])
def test_greeks_match_finite_differences(kind, rng):
    # randomized grid; moneyness kept where the option has material optionality
    # so the relative comparison is well posed
    scales = {"dS": 1.0, "dSigma": 1.0, "dSS": 1.0, "dSigmaSigma": 1.0, "dSSigma": 1.0}
    for _ in range(20):
        K = float(rng.uniform(0.8, 1.25))
        spec = VanillaSpec(kind, maturity=1.0, strike=K if kind != "log-contract" else None)
        S = K * float(np.exp(rng.uniform(-0.35, 0.35)))
        sig = float(rng.uniform(0.15, 0.45))
        b, fd = _fd_check(spec, 0.0, S, sig)
        for name, approx in fd.items():
            exact = getattr(b, name)
            denom = max(abs(exact), abs(approx), 1e-3 * scales[name])
            assert abs(exact - approx) / denom < 1e-6, (kind, name, S, sig)


def test_node_doubling_is_converged():
    for kind, strike in [("call", 1.0), ("put", 0.9), ("smooth-put", 1.1), ("log-contract", None)]:
        spec = VanillaSpec(kind, maturity=1.0, strike=strike)
        v64 = european_value(spec, 0.0, 1.05, 0.25, nodes=64)
        v128 = european_value(spec, 0.0, 1.05, 0.25, nodes=128)
        assert abs(v64 - v128) < 1e-10 * max(abs(v64), 1e-3)


# ---------------------------------------------------------------------------
# forward start
# ---------------------------------------------------------------------------

def test_forward_start_after_reset_is_call():
    b = forward_start_value(0.7, 110.0, 100.0, 0.2, T_reset=0.5, T=1.0)
    c = european_greeks(VanillaSpec("call", maturity=1.0, strike=100.0), 0.7, 110.0, 0.2)
    assert b.value == pytest.approx(c.value, rel=1e-12)
    assert b.dS == pytest.approx(c.dS, rel=1e-12)
    assert b.dSigma == pytest.approx(c.dSigma, rel=1e-12)


def test_forward_start_before_reset_linear_in_stock():
    b = forward_start_value(0.2, 100.0, 100.0, 0.2, T_reset=0.5, T=1.0)
    assert b.dSS == 0.0
    assert b.dS == pytest.approx(b.value / 100.0, rel=1e-12)
    b2 = forward_start_value(0.2, 123.0, 123.0, 0.2, T_reset=0.5, T=1.0)
    assert b2.value == pytest.approx(b.value * 1.23, rel=1e-12)


def test_forward_start_pathwise_delta_oracle():
    # bump the initial stock with the reset value co-moving; the pathwise
    # derivative of (S_T - S_reset)+ is payoff/S0 by homogeneity
    rng = np.random.default_rng(7)
    n = 200_000
    sig, t_reset, T = 0.2, 0.5, 1.0
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    s_reset = np.exp(sig * math.sqrt(t_reset) * z1 - 0.5 * sig ** 2 * t_reset)
    s_T = s_reset * np.exp(sig * math.sqrt(T - t_reset) * z2 - 0.5 * sig ** 2 * (T - t_reset))
    pathwise = np.maximum(s_T - s_reset, 0.0) + 0.0  # degree-one homogeneous payoff
    est = pathwise.mean()
    se = pathwise.std(ddof=1) / math.sqrt(n)
    b = forward_start_value(0.0, 1.0, 1.0, sig, T_reset=t_reset, T=T)
    delta_eff = b.dS + 1.0 * b.dA  # gamma coefficient is 1 before the reset
    assert abs(delta_eff - est) < 3 * se


def test_forward_start_domain_errors():
    with pytest.raises(DomainError):
        forward_start_value(0.2, 1.0, 1.0, 0.2, T_reset=1.5, T=1.0)
    with pytest.raises(DomainError):
        forward_start_value(1.2, 1.0, 1.0, 0.2, T_reset=0.5, T=1.0)


# ---------------------------------------------------------------------------
# PDE residual diagnostics
# ---------------------------------------------------------------------------

def _surface_of(spec):
    def surface(t, S, A, M, Sigma):
        b = european_greeks(spec, t, S, Sigma)
        return b

    return surface


def test_pde_residual_call_surface():
    spec = VanillaSpec("call", maturity=1.0, strike=1.0)
    state = MarketState(t=0.4, S=1.1, A=0.0, M=1.2, Sigma=0.25)
    res = pde_residual(_surface_of(spec), (0.0, 0.0, 0.0, 0.0), state)
    b = european_greeks(spec, state.t, state.S, state.Sigma)
    scale = 0.5 * state.Sigma ** 2 * state.S ** 2 * abs(b.dSS)
    assert abs(res) <= 1e-6 * scale


def test_pde_residual_log_contract_cancels():
    spec = VanillaSpec("log-contract", maturity=2.0)
    state = MarketState(t=0.5, S=1.3, A=0.0, M=1.3, Sigma=0.2)
    res = pde_residual(_surface_of(spec), (0.0, 0.0, 0.0, 0.0), state)
    assert abs(res) <= 1e-8


def test_pde_residual_forward_start():
    fs = forward_start_target(0.5, 1.0)
    state = MarketState(t=0.2, S=1.05, A=1.05, M=1.1, Sigma=0.22)
    res = pde_residual(fs.surface, fs.coefficients(), state)
    assert abs(res) <= 1e-6 * state.S


def test_missing_auxiliary_partial_is_named():
    b = GreekBundle(1.0, 0.5, 0.1, 0.4, 0.05, 0.2)
    with pytest.raises(CapabilityError) as err:
        b.require("dA")
    assert err.value.missing == "dA"


def test_traded_call_surface_matches_quadrature():
    # the fast closed-form surface and the quadrature op agree at 1e-10:
    # this pins the simulator's hot path to the analytics contract
    for kind, strike in [("call", 1.0), ("put", 1.1), ("smooth-put", 0.9),
                         ("power", None), ("log-contract", None)]:
        spec = VanillaSpec(kind, maturity=1.5, strike=strike or 1.0 if kind != "log-contract" else None)
        if kind in ("power", "log-contract"):
            spec = VanillaSpec(kind, maturity=1.5)
        surf = traded_call_surface(spec)
        for S in (0.85, 1.0, 1.2):
            for sig in (0.15, 0.3):
                fast = surf(0.25, S, None, None, sig)
                slow = european_greeks(spec, 0.25, S, sig)
                for name in ("value", "dS", "dSS", "dSigma", "dSSigma", "dSigmaSigma"):
                    a, b = getattr(fast, name), getattr(slow, name)
                    assert abs(a - b) <= 1e-10 * max(1.0, abs(a)), (kind, name, S, sig)
