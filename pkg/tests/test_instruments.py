"""Target assembly: built-ins, negation, synthetic surfaces, coefficients."""

import numpy as np
import pytest

from uvhedge import DomainError, VanillaSpec, builtin_target, negate, vanilla_target
from uvhedge.instruments import (
    eval_coefficient,
    forward_start_target,
    quadrature_surface,
    traded_call_surface,
)


def test_builtin_factory():
    t = builtin_target("smooth-put", 1.0, strike=0.9)
    assert t.s_only and t.name == "smooth-put"
    fs = builtin_target("forward-start", 1.0, t_reset=0.25)
    assert not fs.s_only
    assert fs.a0(1.23) == 1.23
    with pytest.raises(DomainError):
        builtin_target("forward-start", 1.0)  # missing t_reset
    with pytest.raises(DomainError):
        builtin_target("call", 1.0)  # missing strike


def test_negate_flips_everything():
    base = vanilla_target(VanillaSpec("smooth-put", maturity=1.0, strike=0.9))
    flipped = negate(base)
    b = base.bundle(0.2, 1.05, 0.0, 1.1, 0.2)
    f = flipped.bundle(0.2, 1.05, 0.0, 1.1, 0.2)
    assert f.value == -b.value and f.dSigma == -b.dSigma and f.dSS == -b.dSS
    assert flipped.payoff(np.array([0.8]), 0.0, 0.0) == -base.payoff(np.array([0.8]), 0.0, 0.0)
    assert flipped.name == "-(smooth-put)"


def test_forward_start_gamma_coefficient_switches():
    fs = forward_start_target(0.5, 1.0)
    assert eval_coefficient(fs.gamma, 0.2, 1.0, 1.0, 1.0) == 1.0
    assert eval_coefficient(fs.gamma, 0.7, 1.0, 1.0, 1.0) == 0.0
    assert eval_coefficient(fs.beta, 0.2, 1.0, 1.0, 1.0) == 0.0


def test_forward_start_surface_array_evaluation():
    fs = forward_start_target(0.5, 1.0)
    S = np.array([0.9, 1.0, 1.15])
    before = fs.bundle(0.2, S, S, S, np.full(3, 0.2))
    assert np.allclose(before.dS, before.value / S)
    after = fs.bundle(0.7, S, np.full(3, 1.0), S, np.full(3, 0.2))
    assert np.all(after.dSS > 0)
    assert np.all(np.asarray(after.dA) < 0)  # short the frozen strike


def test_quadrature_surface_matches_fast_surface():
    spec = VanillaSpec("smooth-put", maturity=1.0, strike=1.05)
    slow = quadrature_surface(spec.payoff, spec.maturity, kinks=spec.kinks())
    fast = traded_call_surface(spec)
    a = slow(0.3, np.array([0.9, 1.1]), None, None, np.array([0.2, 0.3]))
    b = fast(0.3, np.array([0.9, 1.1]), None, None, np.array([0.2, 0.3]))
    for name in ("value", "dS", "dSS", "dSigma", "dSSigma", "dSigmaSigma"):
        assert np.allclose(getattr(a, name), getattr(b, name), rtol=1e-10), name


def test_surface_rejects_expired_evaluation():
    t = vanilla_target(VanillaSpec("call", maturity=1.0, strike=1.0))
    with pytest.raises(DomainError):
        t.bundle(1.0, 1.0, 0.0, 1.0, 0.2)
