"""Reference/candidate/modified adversary controls and the drift functionals."""

import numpy as np
import pytest

from uvhedge import (
    ControlVector,
    MarketState,
    PenaltyWeights,
    candidate_control,
    drift_bC,
    drift_bV,
    modified_control,
    nu_hat,
    reference_control,
    vanilla_target,
    zeta_tilde,
)
from uvhedge.analytics import european_greeks
from uvhedge.controls import (
    candidate_control_arrays,
    drift_bC_arrays,
    modified_control_arrays,
    psi0_search,
)
from uvhedge.errors import DomainError
from uvhedge.market import ControlBox
from uvhedge.simulator import penalty
from uvhedge.vgvv import call_vgvv, option_vgvv

STATE = MarketState(t=0.4, S=1.06, A=0.0, M=1.1, Sigma=0.23)


def test_reference_control_values():
    ref = reference_control(0.2)
    assert ref == ControlVector(0.0, 0.2, 0.0, 0.0)
    with pytest.raises(DomainError):
        reference_control(0.0)


def test_reference_control_kills_drift_and_penalty(atm_call):
    ref = reference_control(STATE.Sigma)
    assert drift_bC(STATE, ref, atm_call) == 0.0
    assert penalty(STATE.Sigma, ref, PenaltyWeights()) == 0.0


def test_drift_is_linear_in_vol_drift(atm_call):
    # only the nu-term survives around the reference point
    ref = reference_control(STATE.Sigma)
    for delta in (1e-3, 0.5):
        ctrl = ControlVector(delta, ref.sigma, 0.0, 0.0)
        vega = european_greeks(atm_call, STATE.t, STATE.S, STATE.Sigma).dSigma
        assert drift_bC(STATE, ctrl, atm_call) == pytest.approx(delta * vega, rel=1e-9)


def test_drift_bV_matches_bC_for_the_call(atm_call):
    spec = vanilla_target(atm_call)
    ctrl = ControlVector(0.1, 0.25, -0.3, 0.2)
    assert drift_bV(spec, STATE, ctrl) == pytest.approx(drift_bC(STATE, ctrl, atm_call), rel=1e-9)


def test_drift_bV_leading_order_expansion(atm_call, smooth_put_target, weights):
    c = call_vgvv(STATE, atm_call)
    v = option_vgvv(smooth_put_target, STATE)
    zt = zeta_tilde(c, v, weights)
    g = float(np.dot(v.as_array(), zt))
    remainders = []
    for psi in (1e-2, 1e-3):
        ctrl = ControlVector(zt[0] * psi, STATE.Sigma + zt[1] * psi, zt[2] * psi, zt[3] * psi)
        bv = drift_bV(smooth_put_target, STATE, ctrl)
        remainders.append((bv - g * psi) / psi ** 2)
    # the remainder over psi^2 is the constant quadratic coefficient
    assert remainders[0] == pytest.approx(remainders[1], rel=1e-3, abs=1e-12)


def test_candidate_control_band_fallback(atm_call, smooth_put_target, weights, band):
    at_edge = MarketState(t=0.4, S=1.0, A=0.0, M=1.0, Sigma=band.hi)
    ctrl = candidate_control(smooth_put_target, at_edge, weights, band, 0.1, atm_call)
    assert ctrl == reference_control(band.hi)
    outside = MarketState(t=0.4, S=1.0, A=0.0, M=1.0, Sigma=0.5)
    ctrl = candidate_control(smooth_put_target, outside, weights, band, 0.1, atm_call)
    assert ctrl == reference_control(0.5)


def test_candidate_control_collinear_target(atm_call, parity_put_target, weights, band):
    ctrl = candidate_control(parity_put_target, STATE, weights, band, 0.1, atm_call)
    assert ctrl == reference_control(STATE.Sigma)


def test_candidate_control_norm_bound(atm_call, smooth_put_target, weights, band):
    psi = 0.07
    ctrl = candidate_control(smooth_put_target, STATE, weights, band, psi, atm_call)
    v = option_vgvv(smooth_put_target, STATE)
    dev = ctrl.as_array() - reference_control(STATE.Sigma).as_array()
    assert np.linalg.norm(dev) <= weights.max_weight * np.linalg.norm(v.as_array()) * psi * (1 + 1e-12)


def test_nu_hat_trivial_and_single_channel(atm_call):
    assert nu_hat(STATE, np.zeros(4), atm_call) == 0.0
    b = european_greeks(atm_call, STATE.t, STATE.S, STATE.Sigma)
    expected = -STATE.S ** 2 * b.dSS / (2.0 * b.dSigma)
    assert nu_hat(STATE, np.array([0.0, 1.0, 0.0, 0.0]), atm_call) == pytest.approx(expected, rel=1e-9)


def test_modified_control_reference_when_tilt_vanishes(atm_call, parity_put_target, weights, band):
    ctrl = modified_control(parity_put_target, STATE, weights, band, 0.1, atm_call)
    assert ctrl == reference_control(STATE.Sigma)


def test_modified_control_drift_exact_and_candidate_quadratic(atm_call, smooth_put_target,
                                                              weights, band, rng):
    S = np.exp(rng.normal(0.0, 0.25, 400))
    Sig = rng.uniform(band.lo + 0.01, band.hi - 0.01, 400)
    t = 0.3
    worst = []
    for psi in (1e-1, 5e-2, 2.5e-2):
        cand = candidate_control_arrays(smooth_put_target, atm_call, weights, band, psi,
                                        t, S, None, None, Sig)
        resid = np.abs(drift_bC_arrays(atm_call, t, S, Sig, cand)).max()
        worst.append(resid)
        mod = modified_control_arrays(smooth_put_target, atm_call, weights, band, psi,
                                      t, S, None, None, Sig)
        exact = np.abs(drift_bC_arrays(atm_call, t, S, Sig, mod)).max()
        assert exact <= 1e-12
        # xi coordinate never negative
        assert np.all(mod[3] >= 0.0) and np.all(cand[3] >= 0.0)
    # halving psi quarters the candidate residual, within 20%
    assert worst[0] / worst[1] == pytest.approx(4.0, rel=0.2)
    assert worst[1] / worst[2] == pytest.approx(4.0, rel=0.2)


def test_modified_control_continuity_in_sigma(atm_call, smooth_put_target, weights, band):
    vals = []
    jumps = []
    for n in (200, 400, 800):
        sig = np.linspace(band.lo + 1e-6, band.hi - 1e-6, n)
        ctrl = modified_control_arrays(smooth_put_target, atm_call, weights, band, 0.1,
                                       0.4, np.full(n, 1.05), None, None, sig)
        step = np.abs(np.diff(ctrl, axis=1)).max()
        jumps.append(step)
        vals.append(ctrl)
    assert jumps[1] < jumps[0] and jumps[2] < jumps[1]
    assert jumps[2] < 2.5 * jumps[0] * (200 / 800)  # roughly linear shrinkage


def test_psi0_box_threshold(atm_call, smooth_put_target, weights, band):
    box = ControlBox(-0.05, 0.05, 0.1, 0.5, -0.05, 0.05, 0.05)
    psi0, sup_nu_hat = psi0_search(smooth_put_target, atm_call, weights, band, box,
                                   np.linspace(0.05, 0.95, 4), np.linspace(0.8, 1.3, 6),
                                   np.linspace(band.lo + 0.01, band.hi - 0.01, 4))
    assert 0.0 < psi0 <= 1.0
    assert sup_nu_hat > 0.0
    # below the threshold the box holds on the same grid
    ctrl = modified_control_arrays(smooth_put_target, atm_call, weights, band, 0.5 * psi0,
                                   0.5, np.linspace(0.8, 1.3, 6), None, None,
                                   np.full(6, 0.2))
    assert box.contains(ctrl)
