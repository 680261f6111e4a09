"""Command implementations shared by the CLI and the HTTP service."""

from __future__ import annotations

import time
from typing import Optional

from .. import cashequiv, selftest
from ..errors import ConfigError
from ..simulator import expansion_report
from ..vgvv import pipeline
from .schemas import ExperimentConfig, Report


def _report(command: str, cfg: Optional[ExperimentConfig], results: dict, timings: dict) -> Report:
    return Report(
        command=command,
        config_hash=cfg.config_hash() if cfg else "",
        seed=cfg.numerics.mc.seed if cfg else 0,
        results=results,
        timings=timings,
    )


def _premium(cfg: ExperimentConfig, route: str):
    """(w0, stderr-or-None, route used).  Falls back from PDE to MC for exotic state."""
    target = cfg.target.to_target()
    call = cfg.call.to_vanilla()
    weights = cfg.penalty.to_weights()
    market = cfg.market.to_market()
    band = market.band
    if route == "auto":
        route = "pde" if target.s_only else "mc"
    if route == "pde":
        sol = cashequiv.cash_equivalent_pde(target, call, weights, band, market,
                                            cfg.numerics.pde.to_grid())
        return sol.w0, None, "pde"
    est, se = cashequiv.cash_equivalent_mc(target, call, weights, band, market,
                                           cfg.numerics.mc.to_mc())
    return est, se, "mc"


def run_price(cfg: ExperimentConfig, route: str = "auto") -> Report:
    """Reference value, greeks, premium and first-order ask price of the target."""
    t0 = time.perf_counter()
    target = cfg.target.to_target()
    call = cfg.call.to_vanilla()
    market = cfg.market.to_market()
    a0 = market.initial_auxiliary(target)
    bundle = target.bundle(0.0, market.s0, a0, market.s0, market.sigma0)
    v0 = float(bundle.value)
    t_value = time.perf_counter() - t0

    t1 = time.perf_counter()
    w0, w0_se, used = _premium(cfg, route)
    ask = cashequiv.indifference_ask(v0, w0, cfg.penalty.psi)
    t_premium = time.perf_counter() - t1

    results = {
        "target": cfg.target.kind,
        "reference_value": v0,
        "greeks": {
            "dS": float(bundle.dS),
            "dSS": float(bundle.dSS),
            "dSigma": float(bundle.dSigma),
            "dSSigma": float(bundle.dSSigma),
            "dSigmaSigma": float(bundle.dSigmaSigma),
        },
        "cash_equivalent": w0,
        "cash_equivalent_stderr": w0_se,
        "premium_route": used,
        "psi": cfg.penalty.psi,
        "uncertainty_premium": w0 * cfg.penalty.psi,
        "ask_price": ask,
    }
    return _report("price", cfg, results, {"value_s": t_value, "premium_s": t_premium})


def run_cashequiv(cfg: ExperimentConfig, route: str = "both", refine: bool = False) -> Report:
    t0 = time.perf_counter()
    results: dict = {"route": route}
    timings: dict = {}
    target = cfg.target.to_target()
    call = cfg.call.to_vanilla()
    weights = cfg.penalty.to_weights()
    market = cfg.market.to_market()
    band = market.band

    if route in ("pde", "both"):
        grid = cfg.numerics.pde.to_grid()
        sol = cashequiv.cash_equivalent_pde(target, call, weights, band, market, grid)
        results["pde"] = {"w0": sol.w0, "space_nodes": grid.space_nodes,
                          "time_steps": grid.time_steps, "span_sd": grid.span_sd}
        if refine:
            fine = cashequiv.cash_equivalent_pde(target, call, weights, band, market,
                                                 grid.refined())
            results["pde"]["w0_refined"] = fine.w0
            results["pde"]["refinement_rel_change"] = (
                abs(fine.w0 - sol.w0) / max(abs(fine.w0), 1e-300)
            )
        timings["pde_s"] = time.perf_counter() - t0

    if route in ("mc", "both"):
        t1 = time.perf_counter()
        est, se = cashequiv.cash_equivalent_mc(target, call, weights, band, market,
                                               cfg.numerics.mc.to_mc())
        results["mc"] = {"w0": est, "stderr": se,
                         "paths": cfg.numerics.mc.paths, "steps": cfg.numerics.mc.steps}
        timings["mc_s"] = time.perf_counter() - t1

    if route == "both":
        diff = abs(results["pde"]["w0"] - results["mc"]["w0"])
        tol = max(3.0 * results["mc"]["stderr"], 0.01 * abs(results["pde"]["w0"]))
        results["discrepancy"] = diff
        results["tolerance"] = tol
        results["agrees"] = bool(diff <= tol)
    return _report("cashequiv", cfg, results, timings)


def run_sweep(cfg: ExperimentConfig, psi_grid=None, challenger: bool = False) -> Report:
    t0 = time.perf_counter()
    grid = psi_grid or cfg.penalty.psi_grid
    if not grid:
        raise ConfigError("sweep needs penalty.psi_grid (or a --psi-grid override)")
    target = cfg.target.to_target()
    call = cfg.call.to_vanilla()
    weights = cfg.penalty.to_weights()
    market = cfg.market.to_market()
    rep = expansion_report(target, call, cfg.utility.to_utility(), weights, market.band,
                           grid, market, cfg.numerics.sweep_mc(), challenger=challenger)
    rows = []
    for p in rep.points:
        row = {"psi": p.psi, "J": p.j_hedge, "stderr": p.se_hedge}
        if challenger:
            row.update({"J_challenger": p.j_challenger, "stderr_challenger": p.se_challenger,
                        "challenger_minus_hedge": p.diff, "diff_stderr": p.diff_se})
        rows.append(row)
    results = {
        "points": rows,
        "slope": rep.slope,
        "slope_stderr": rep.slope_se,
        "intercept": rep.intercept,
        "intercept_stderr": rep.intercept_se,
        "r_squared": rep.r_squared,
        "cash_equivalent_mc": rep.w0_reference,
        "cash_equivalent_mc_stderr": rep.w0_reference_se,
        "slope_over_cash_equivalent": rep.slope_vs_reference,
        "u0": rep.u0,
        "marginal_u0": rep.u1_0,
    }
    return _report("sweep", cfg, results, {"total_s": time.perf_counter() - t0})


def run_hedge_sim(cfg: ExperimentConfig, psi: Optional[float] = None) -> Report:
    """Single-psi P&L/objective snapshot for the hedge and the delta-only challenger."""
    from ..simulator import evaluate_hedge_point

    t0 = time.perf_counter()
    psi = cfg.penalty.psi if psi is None else psi
    if psi <= 0.0:
        raise ConfigError("hedge-sim needs a positive psi (penalty.psi or --psi)")
    target = cfg.target.to_target()
    call = cfg.call.to_vanilla()
    weights = cfg.penalty.to_weights()
    market = cfg.market.to_market()
    point = evaluate_hedge_point(target, call, cfg.utility.to_utility(), weights, market.band,
                                 psi, market, cfg.numerics.sweep_mc(), challenger=True)

    a0 = market.initial_auxiliary(target)
    pipe = pipeline(target, call, weights, 0.0, market.s0, a0, market.s0, market.sigma0)
    theta0, phi0 = _initial_hedge(target, call, market)
    results = {
        "psi": psi,
        "objective_delta_vega": {"value": point.j_hedge, "stderr": point.se_hedge},
        "objective_delta_only": {"value": point.j_challenger, "stderr": point.se_challenger},
        "challenger_minus_hedge": {"value": point.diff, "paired_stderr": point.diff_se},
        "initial_hedge": {"theta": theta0, "phi": phi0},
        "initial_source_term": float(pipe.source),
        "initial_perturbation": [float(x) for x in pipe.zeta_tilde],
    }
    return _report("hedge-sim", cfg, results, {"total_s": time.perf_counter() - t0})


def _initial_hedge(target, call, market):
    from ..simulator import hedge_arrays

    a0 = market.initial_auxiliary(target)
    theta, phi = hedge_arrays(target, call, 0.0, market.s0, a0, market.s0, market.sigma0)
    return float(theta), float(phi)


def run_selftest(corrupt: Optional[str] = None) -> Report:
    t0 = time.perf_counter()
    try:
        rows = selftest.run_selftest(corrupt=corrupt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    results = {
        "properties": [r.as_dict() for r in rows],
        "passed": all(r.passed for r in rows),
    }
    return _report("selftest", None, results, {"total_s": time.perf_counter() - t0})
