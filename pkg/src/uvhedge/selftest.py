"""Fast invariant suite behind the ``selftest`` command.

Each property runs with fixed seeds, reports a scalar metric against its
tolerance, and is independent of the others.  ``corrupt`` names a property
whose tolerance is zeroed out, which must make exactly that property fail;
the CLI uses it to prove the harness can fail at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import analytics, lcqp
from .analytics import VanillaSpec
from .controls import candidate_control_arrays, modified_control_arrays, drift_bC_arrays
from .instruments import vanilla_target
from .market import PenaltyWeights, VolBand
from .vgvv import lagrange_arrays, source_term_arrays, zeta_tilde_arrays


@dataclass
class PropertyResult:
    name: str
    metric: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "metric": self.metric, "tolerance": self.tolerance,
                "passed": self.passed, "detail": self.detail}


def _lcqp_kkt(rng) -> tuple:
    worst = 0.0
    for _ in range(400):
        inst = lcqp.random_instance(rng, int(rng.integers(2, 8)))
        sol = lcqp.solve(inst)
        res = lcqp.kkt_residuals(inst, sol)
        worst = max(worst, max(res.values()))
        gap = abs(lcqp.dual_value(inst, sol.lambda_star, sol.mu_star) - sol.primal_value)
        worst = max(worst, gap / (1.0 + abs(sol.primal_value)))
    return worst, "max scaled KKT residual and duality gap over 400 random instances"


def _vgvv_feasibility(rng) -> tuple:
    c = rng.normal(size=(4, 3000))
    c[0] = np.sign(c[0]) * (np.abs(c[0]) + 0.1)
    v = rng.normal(size=(4, 3000))
    w = PenaltyWeights(*np.exp(rng.uniform(-1, 1, size=4)))
    lam, mu = lagrange_arrays(c, v, w)
    zt = zeta_tilde_arrays(c, v, w)
    g = source_term_arrays(c, v, w)
    scale = 1.0 + np.abs(c).max(axis=0) * np.abs(zt).max(axis=0)
    worst = max(
        float(np.max(np.abs(np.sum(c * zt, axis=0)) / scale)),
        float(np.max(-zt[3]) / max(np.abs(zt[3]).max(), 1.0)),
        float(np.max(-mu)),
        float(np.max(np.abs(mu * zt[3]) / scale)),
        float(np.max(-g) / max(np.abs(g).max(), 1.0)),
    )
    return worst, "constraint/sign/slackness residuals on 3000 random draws"


def _greek_fd(rng) -> tuple:
    # states keep |log moneyness| <= 0.3 so the greeks stay material; the
    # denominator floor keeps the ratio well-posed where a greek crosses zero
    worst = 0.0
    for _ in range(20):
        kind = ["call", "put", "smooth-put", "power", "log-contract"][int(rng.integers(0, 5))]
        strike = float(rng.uniform(0.8, 1.2))
        spec = VanillaSpec(kind, maturity=1.0, strike=strike if kind != "log-contract" else None)
        S = strike * float(np.exp(rng.uniform(-0.3, 0.3)))
        Sig = float(rng.uniform(0.15, 0.4))
        b = analytics.european_greeks(spec, 0.0, S, Sig)
        h = 1e-4 * S
        fd_dS = (analytics.european_value(spec, 0.0, S + h, Sig)
                 - analytics.european_value(spec, 0.0, S - h, Sig)) / (2 * h)
        hv = 1e-4 * Sig
        fd_dSig = (analytics.european_value(spec, 0.0, S, Sig + hv)
                   - analytics.european_value(spec, 0.0, S, Sig - hv)) / (2 * hv)
        worst = max(worst,
                    abs(b.dS - fd_dS) / max(abs(fd_dS), 1e-3),
                    abs(b.dSigma - fd_dSig) / max(abs(fd_dSig), 1e-3 * S))
    return worst, "central-difference check of dS and dSigma on 20 random points"


def _drift_scaling(rng) -> tuple:
    call = VanillaSpec("call", maturity=2.0, strike=1.0)
    target = vanilla_target(VanillaSpec("smooth-put", maturity=1.0, strike=0.9))
    w = PenaltyWeights(0.1, 0.1, 0.1, 0.1)
    band = VolBand(0.05, 0.6)
    S = np.exp(rng.normal(0.0, 0.25, size=200))
    Sig = rng.uniform(0.1, 0.5, size=200)
    t = 0.4
    resid = []
    for psi in (1e-1, 5e-2, 2.5e-2):
        ctrl = candidate_control_arrays(target, call, w, band, psi, t, S, None, None, Sig)
        resid.append(np.abs(drift_bC_arrays(call, t, S, Sig, ctrl)).max())
    slope = np.polyfit(np.log([1e-1, 5e-2, 2.5e-2]), np.log(resid), 1)[0]
    ctrl = modified_control_arrays(target, call, w, band, 1e-1, t, S, None, None, Sig)
    exact = np.abs(drift_bC_arrays(call, t, S, Sig, ctrl)).max()
    metric = max(abs(slope - 2.0), exact / 1e-12 * 0.1)  # exact residual must be ~1e-13
    return float(metric), f"candidate log-log slope {slope:.3f}; modified residual {exact:.2e}"


_PROPERTIES = {
    "lcqp-kkt": (_lcqp_kkt, 1e-12),
    "vgvv-feasibility": (_vgvv_feasibility, 1e-10),
    "greek-finite-differences": (_greek_fd, 1e-6),
    "drift-residual-scaling": (_drift_scaling, 0.2),
}


def run_selftest(corrupt: Optional[str] = None, seed: int = 20240817) -> List[PropertyResult]:
    if corrupt is not None and corrupt not in _PROPERTIES:
        raise ValueError(f"unknown property {corrupt!r}; available: {sorted(_PROPERTIES)}")
    results = []
    for name, (fn, tol) in _PROPERTIES.items():
        rng = np.random.default_rng(seed)
        metric, detail = fn(rng)
        tolerance = 0.0 if name == corrupt else tol
        results.append(PropertyResult(name=name, metric=float(metric), tolerance=tolerance,
                                      passed=bool(metric <= tolerance), detail=detail))
    return results
