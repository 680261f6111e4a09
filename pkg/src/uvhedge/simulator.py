"""Path simulation, hedging P&L and the empirical value-expansion check.

The engine is Euler-Maruyama on (log S, Sigma) driven by a feedback control
(nu, sigma, eta, xi); the auxiliary state A follows its drift/loading
decomposition and M is the running maximum.  Paths are generated in fixed-size
blocks with per-block seeds derived from (base seed, block index), and every
reduction runs in block order, so results are bit-identical no matter how
blocks are scheduled.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional

import numpy as np

from .analytics import VanillaSpec
from .cashequiv import McConfig, cash_equivalent_mc
from .errors import ConfigError, DomainError, UvhedgeError
from .instruments import OptionSpec, eval_coefficient, traded_call_surface
from .market import MarketSetup, PenaltyWeights, VolBand
from .vgvv import effective_greeks_from_bundle

#: paths per RNG block; fixed so that worker scheduling cannot change results
SIM_BLOCK = 8192


def worker_cap() -> int:
    """Thread cap from UVHEDGE_THREADS; results never depend on it."""
    raw = os.environ.get("UVHEDGE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# utility functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Utility:
    """Risk preferences with nonincreasing absolute risk aversion.

    ``exponential`` has constant absolute risk aversion a; ``shifted-power``
    has decreasing absolute risk aversion a/(y + shift) and requires the P&L to
    stay above -shift.
    """

    kind: str = "exponential"
    a: float = 1.0
    shift: float = 10.0

    def __post_init__(self):
        if self.kind not in ("exponential", "shifted-power"):
            raise ConfigError(f"unknown utility kind {self.kind!r}")
        if self.a <= 0.0:
            raise ConfigError("risk aversion parameter must be positive")

    def u(self, y):
        y = np.asarray(y, float)
        if self.kind == "exponential":
            return -np.exp(-self.a * y) / self.a
        base = self._base(y)
        if self.a == 1.0:
            return np.log(base)
        return (base ** (1.0 - self.a) - 1.0) / (1.0 - self.a)

    def u1(self, y):
        y = np.asarray(y, float)
        if self.kind == "exponential":
            return np.exp(-self.a * y)
        return self._base(y) ** (-self.a)

    def u2(self, y):
        y = np.asarray(y, float)
        if self.kind == "exponential":
            return -self.a * np.exp(-self.a * y)
        return -self.a * self._base(y) ** (-self.a - 1.0)

    def u3(self, y):
        y = np.asarray(y, float)
        if self.kind == "exponential":
            return self.a * self.a * np.exp(-self.a * y)
        return self.a * (self.a + 1.0) * self._base(y) ** (-self.a - 2.0)

    def _base(self, y):
        base = y + self.shift
        if np.any(base <= 0.0):
            raise DomainError(
                f"shifted-power utility needs P&L above {-self.shift}; got minimum {np.min(y)}"
            )
        return base


# ---------------------------------------------------------------------------
# path ensembles
# ---------------------------------------------------------------------------

@dataclass
class PathBlock:
    """One block of simulated paths; arrays are (paths, steps+1) except zeta (4, paths, steps)."""

    times: np.ndarray
    S: np.ndarray
    A: np.ndarray
    M: np.ndarray
    Sigma: np.ndarray
    zeta: np.ndarray
    block_index: int

    @property
    def paths(self) -> int:
        return self.S.shape[0]

    @property
    def steps(self) -> int:
        return self.S.shape[1] - 1


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def _simulate_block(control: Callable, spec: OptionSpec, market: MarketSetup,
                    times: np.ndarray, n: int, seed: int, block: int,
                    a0: float) -> PathBlock:
    steps = len(times) - 1
    dt = times[1] - times[0]
    sdt = math.sqrt(dt)
    band = market.band
    rng = _block_rng(seed, block)
    S = np.empty((n, steps + 1))
    A = np.empty((n, steps + 1))
    M = np.empty((n, steps + 1))
    Sig = np.empty((n, steps + 1))
    zeta = np.empty((4, n, steps))
    S[:, 0] = market.s0
    A[:, 0] = a0
    M[:, 0] = market.s0
    Sig[:, 0] = market.sigma0
    logS = np.full(n, math.log(market.s0))
    for i in range(steps):
        t = times[i]
        try:
            ctrl = np.asarray(control(t, S[:, i], A[:, i], M[:, i], Sig[:, i]), float)
        except UvhedgeError as exc:
            raise type(exc)(f"control failed at block {block}, step {i}, t={t:.6g}: {exc}") from exc
        zeta[:, :, i] = ctrl
        nu, sigma, eta, xi = ctrl
        z0 = rng.standard_normal(n)
        z1 = rng.standard_normal(n)
        logS = logS - 0.5 * sigma * sigma * dt + sigma * sdt * z0
        S_new = np.exp(logS)
        Sig_new = Sig[:, i] + nu * dt + eta * sdt * z0 + np.sqrt(np.maximum(xi, 0.0)) * sdt * z1
        Sig_new = np.clip(Sig_new, band.lo, band.hi)
        M_new = np.maximum(M[:, i], S_new)
        alpha = eval_coefficient(spec.alpha, t, S[:, i], A[:, i], M[:, i])
        beta = eval_coefficient(spec.beta, t, S[:, i], A[:, i], M[:, i])
        gam = eval_coefficient(spec.gamma, t, S[:, i], A[:, i], M[:, i])
        delta = eval_coefficient(spec.delta, t, S[:, i], A[:, i], M[:, i])
        A[:, i + 1] = (A[:, i] + (alpha + 0.5 * sigma * sigma * beta) * dt
                       + gam * (S_new - S[:, i]) + delta * (M_new - M[:, i]))
        S[:, i + 1] = S_new
        M[:, i + 1] = M_new
        Sig[:, i + 1] = Sig_new
    return PathBlock(times=times, S=S, A=A, M=M, Sigma=Sig, zeta=zeta, block_index=block)


def simulate(control: Callable, spec: OptionSpec, market: MarketSetup, steps: int,
             paths: int, seed: int, T: Optional[float] = None,
             block_size: int = SIM_BLOCK) -> Iterator[PathBlock]:
    """Yield blocks of paths of (S, A, M, Sigma) under the feedback control.

    ``control`` maps (t, S, A, M, Sigma) to a stacked (4, n) control array.
    The implied vol is clamped to the band edges; at the edge the control has
    already fallen back to the reference by construction of the feedback, so
    the clamp only absorbs the overshoot of a single Euler step.

    Blocks have a fixed size and per-block seeds, are computed by up to
    UVHEDGE_THREADS workers with bounded prefetch, and are yielded in block
    order; results are therefore identical no matter how many workers run.
    """
    if steps < 1 or paths < 1:
        raise ConfigError("need at least one step and one path")
    T = spec.maturity if T is None else T
    a0 = market.initial_auxiliary(spec)
    times = np.linspace(0.0, T, steps + 1)
    plan = []
    done = 0
    while done < paths:
        n = min(block_size, paths - done)
        plan.append((len(plan), n))
        done += n

    workers = min(worker_cap(), len(plan))
    if workers <= 1:
        for block, n in plan:
            yield _simulate_block(control, spec, market, times, n, seed, block, a0)
        return

    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = {}
        next_submit = 0
        for block, n in plan:
            while next_submit < len(plan) and next_submit <= block + workers:
                b, m = plan[next_submit]
                pending[b] = pool.submit(_simulate_block, control, spec, market, times,
                                         m, seed, b, a0)
                next_submit += 1
            yield pending.pop(block).result()


# ---------------------------------------------------------------------------
# hedging strategies and P&L
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HedgePosition:
    """Stock and call holdings of a self-financing strategy at one state."""

    theta: float
    phi: float


def _target_bundle(spec: OptionSpec, t, S, A, M, Sigma):
    return spec.bundle(t, S, A, M, Sigma)


def hedge_arrays(spec: OptionSpec, call: VanillaSpec, t, S, A, M, Sigma, vega_hedged=True):
    """(theta, phi) arrays: vega-matched call holding plus effective-delta completion."""
    cb = traded_call_surface(call)(t, S, None, None, Sigma)
    tb = _target_bundle(spec, t, S, A, M, Sigma)
    g = eval_coefficient(spec.gamma, t, S, A, M)
    delta_eff, _, _ = effective_greeks_from_bundle(tb, g)
    if vega_hedged:
        from .vgvv import _check_vega_floor

        _check_vega_floor(cb.dSigma, S, "delta_vega_hedge")
        phi = tb.dSigma / cb.dSigma
    else:
        phi = np.zeros_like(np.asarray(S, float))
    theta = delta_eff - phi * cb.dS
    return theta, phi


def delta_vega_hedge(spec: OptionSpec, call: VanillaSpec, state) -> HedgePosition:
    """Neutralise net vega with the call, then net effective delta with the stock."""
    theta, phi = hedge_arrays(spec, call, state.t, state.S, state.A, state.M, state.Sigma)
    return HedgePosition(theta=float(theta), phi=float(phi))


def delta_vega_strategy(spec: OptionSpec, call: VanillaSpec) -> Callable:
    def strategy(t, S, A, M, Sigma):
        return hedge_arrays(spec, call, t, S, A, M, Sigma, vega_hedged=True)

    strategy.label = "delta-vega"
    return strategy


def delta_only_strategy(spec: OptionSpec, call: VanillaSpec) -> Callable:
    def strategy(t, S, A, M, Sigma):
        return hedge_arrays(spec, call, t, S, A, M, Sigma, vega_hedged=False)

    strategy.label = "delta-only"
    return strategy


def zero_strategy() -> Callable:
    def strategy(t, S, A, M, Sigma):
        zero = np.zeros_like(np.asarray(S, float))
        return zero, zero

    strategy.label = "unhedged"
    return strategy


@dataclass
class PnlBlock:
    """P&L paths of one block: Y is (paths, steps+1); positions are left-endpoint."""

    times: np.ndarray
    Y: np.ndarray
    y0: float
    v0: float
    gains: np.ndarray
    value_path: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    call_path: np.ndarray


def _call_price_path(call: VanillaSpec, times, S, Sigma):
    """Call prices along the block; intrinsic at (or numerically at) expiry."""
    surface = traded_call_surface(call)
    out = np.empty_like(S)
    for i, t in enumerate(times):
        if call.maturity - t > 1e-12:
            out[:, i] = surface(t, S[:, i], None, None, Sigma[:, i]).value
        else:
            out[:, i] = call.payoff(S[:, i])
    return out


def pnl(strategy: Callable, block: PathBlock, spec: OptionSpec, call: VanillaSpec,
        y0: float = 0.0) -> PnlBlock:
    """Mark-to-model P&L of a strategy along one block of paths.

    Y_t = y0 + V_0 + sum theta dS + sum phi dC - V_t, with positions sampled at
    the left endpoint of each step and the terminal value replaced by the exact
    payoff.
    """
    times, S, A, M, Sig = block.times, block.S, block.A, block.M, block.Sigma
    n, steps = block.paths, block.steps
    V = np.empty_like(S)
    eps = 1e-9 * spec.maturity
    for i, t in enumerate(times):
        if spec.maturity - t > eps:
            V[:, i] = spec.bundle(t, S[:, i], A[:, i], M[:, i], Sig[:, i]).value
        else:
            V[:, i] = spec.payoff(S[:, i], A[:, i], M[:, i])
    C = _call_price_path(call, times, S, Sig)
    theta = np.empty((n, steps))
    phi = np.empty((n, steps))
    for i in range(steps):
        th, ph = strategy(times[i], S[:, i], A[:, i], M[:, i], Sig[:, i])
        theta[:, i] = th
        phi[:, i] = ph
    gains = np.zeros((n, steps + 1))
    increments = theta * np.diff(S, axis=1) + phi * np.diff(C, axis=1)
    np.cumsum(increments, axis=1, out=gains[:, 1:])
    v0 = float(V[0, 0])
    Y = y0 + v0 + gains - V
    return PnlBlock(times=times, Y=Y, y0=y0, v0=v0, gains=gains, value_path=V,
                    theta=theta, phi=phi, call_path=C)


def penalty(Sigma, zeta, weights: PenaltyWeights):
    """Quadratic model-deviation penalty f; zero exactly at the reference control."""
    if hasattr(zeta, "as_array"):
        zeta = zeta.as_array()
    zeta = np.asarray(zeta, float)
    nu, sigma, eta, xi = zeta[0], zeta[1], zeta[2], zeta[3]
    Sigma = np.asarray(Sigma, float)
    return 0.5 * (nu * nu / weights.psi_nu
                  + (sigma - Sigma) ** 2 / weights.psi_sigma
                  + eta * eta / weights.psi_eta
                  + xi * xi / weights.psi_xi)


def penalty_path(block: PathBlock, weights: PenaltyWeights) -> np.ndarray:
    """(paths, steps) penalty values f(Sigma_t, zeta_t) at the left endpoints."""
    return penalty(block.Sigma[:, :-1], block.zeta, weights)


# ---------------------------------------------------------------------------
# objective and expansion report
# ---------------------------------------------------------------------------

@dataclass
class ObjectiveEstimate:
    value: float
    stderr: float
    paths: int
    label: str = ""


def objective(strategy: Callable, control: Callable, spec: OptionSpec, call: VanillaSpec,
              utility: Utility, weights: PenaltyWeights, psi: float, market: MarketSetup,
              mc: McConfig, y0: float = 0.0) -> ObjectiveEstimate:
    """Monte Carlo estimate of E[U(Y_T) + (1/psi) int U'(Y_t) f(Sigma_t, zeta_t) dt]."""
    if psi <= 0.0:
        raise ConfigError(f"objective needs psi > 0, got {psi}")
    total = 0.0
    total_sq = 0.0
    count = 0
    dt = spec.maturity / mc.steps
    for block in simulate(control, spec, market, mc.steps, mc.paths, mc.seed):
        pb = pnl(strategy, block, spec, call, y0=y0)
        f = penalty_path(block, weights)
        pen = np.sum(utility.u1(pb.Y[:, :-1]) * f, axis=1) * dt / psi
        j = utility.u(pb.Y[:, -1]) + pen
        total += float(j.sum())
        total_sq += float(np.dot(j, j))
        count += block.paths
    mean = total / count
    var = max(total_sq - count * mean * mean, 0.0) / max(count - 1, 1)
    return ObjectiveEstimate(value=mean, stderr=float(np.sqrt(var / count)), paths=count,
                             label=getattr(strategy, "label", ""))


@dataclass
class SweepPoint:
    psi: float
    j_hedge: float
    se_hedge: float
    j_challenger: Optional[float] = None
    se_challenger: Optional[float] = None
    diff: Optional[float] = None          # challenger minus hedge, paired
    diff_se: Optional[float] = None


@dataclass
class ExpansionReport:
    points: List[SweepPoint]
    u0: float
    u1_0: float
    slope: float
    slope_se: float
    intercept: float
    intercept_se: float
    r_squared: float
    w0_reference: float
    w0_reference_se: float
    y0: float = 0.0

    @property
    def slope_vs_reference(self) -> float:
        return self.slope / self.w0_reference if self.w0_reference else float("nan")


def _fit_line(x, y, se):
    """Weighted least squares y ~ b0 + b1 x with 1/se^2 weights; returns coef and stderr."""
    x, y, se = np.asarray(x, float), np.asarray(y, float), np.asarray(se, float)
    w = 1.0 / np.maximum(se, 1e-300) ** 2
    X = np.vstack([np.ones_like(x), x]).T
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / tss if tss > 0 else float("nan")
    return beta, np.sqrt(np.diag(cov)), r2


def evaluate_hedge_point(spec: OptionSpec, call: VanillaSpec, utility: Utility,
                         weights: PenaltyWeights, band: VolBand, psi: float,
                         market: MarketSetup, mc: McConfig, y0: float = 0.0,
                         challenger: bool = False) -> SweepPoint:
    """Objective of the delta-vega hedge at one psi under the worst-case feedback.

    With ``challenger`` the plain delta hedge is evaluated on the *same* paths
    and the difference comes with its paired standard error, which is the
    statistically meaningful uncertainty for a fixed-seed comparison.
    """
    from .controls import make_modified_feedback

    control = make_modified_feedback(spec, call, weights, band, psi)
    hedge = delta_vega_strategy(spec, call)
    chall = delta_only_strategy(spec, call) if challenger else None
    dt = spec.maturity / mc.steps
    tot_h = tot_h2 = 0.0
    tot_c = tot_c2 = 0.0
    tot_d = tot_d2 = 0.0
    count = 0
    for block in simulate(control, spec, market, mc.steps, mc.paths, mc.seed):
        f = penalty_path(block, weights)
        pb = pnl(hedge, block, spec, call, y0=y0)
        pen = np.sum(utility.u1(pb.Y[:, :-1]) * f, axis=1) * dt / psi
        jh = utility.u(pb.Y[:, -1]) + pen
        tot_h += float(jh.sum())
        tot_h2 += float(np.dot(jh, jh))
        if chall is not None:
            pc = pnl(chall, block, spec, call, y0=y0)
            pen_c = np.sum(utility.u1(pc.Y[:, :-1]) * f, axis=1) * dt / psi
            jc = utility.u(pc.Y[:, -1]) + pen_c
            d = jc - jh
            tot_c += float(jc.sum())
            tot_c2 += float(np.dot(jc, jc))
            tot_d += float(d.sum())
            tot_d2 += float(np.dot(d, d))
        count += block.paths
    mean_h = tot_h / count
    se_h = math.sqrt(max(tot_h2 - count * mean_h ** 2, 0.0) / max(count - 1, 1) / count)
    point = SweepPoint(psi=psi, j_hedge=mean_h, se_hedge=se_h)
    if chall is not None:
        mean_c = tot_c / count
        point.j_challenger = mean_c
        point.se_challenger = math.sqrt(max(tot_c2 - count * mean_c ** 2, 0.0)
                                        / max(count - 1, 1) / count)
        mean_d = tot_d / count
        point.diff = mean_d
        point.diff_se = math.sqrt(max(tot_d2 - count * mean_d ** 2, 0.0)
                                  / max(count - 1, 1) / count)
    return point


def expansion_report(spec: OptionSpec, call: VanillaSpec, utility: Utility,
                     weights: PenaltyWeights, band: VolBand, psi_grid, market: MarketSetup,
                     mc: McConfig, y0: float = 0.0, challenger: bool = False,
                     w0: Optional[tuple] = None) -> ExpansionReport:
    """Fit (J(psi) - U(y0)) / (-U'(y0)) against psi and compare the slope to the premium.

    For each psi the adversary plays the drift-exact worst-case feedback; the
    delta-vega hedge (and optionally the delta-only challenger, on the same
    paths) is evaluated by Monte Carlo at fixed seeds.  The reference premium
    defaults to the Monte Carlo cash equivalent under the same configuration.
    """
    psi_grid = [float(p) for p in psi_grid]
    if len(psi_grid) < 4:
        raise ConfigError("psi grid needs at least 4 points")
    if max(psi_grid) / min(psi_grid) < 10.0 - 1e-9:
        raise ConfigError("psi grid should span at least a decade")
    if len(set(psi_grid)) != len(psi_grid):
        raise ConfigError("psi grid points must be distinct")

    points = [evaluate_hedge_point(spec, call, utility, weights, band, psi, market, mc,
                                   y0=y0, challenger=challenger)
              for psi in sorted(psi_grid)]

    u0 = float(utility.u(y0))
    u1_0 = float(utility.u1(y0))
    xs = [p.psi for p in points]
    ys = [(p.j_hedge - u0) / (-u1_0) for p in points]
    ses = [p.se_hedge / u1_0 for p in points]
    beta, beta_se, r2 = _fit_line(xs, ys, ses)

    if w0 is None:
        w0_est, w0_se = cash_equivalent_mc(spec, call, weights, band, market, mc)
    else:
        w0_est, w0_se = w0
    return ExpansionReport(points=points, u0=u0, u1_0=u1_0,
                           slope=float(beta[1]), slope_se=float(beta_se[1]),
                           intercept=float(beta[0]), intercept_se=float(beta_se[0]),
                           r_squared=r2, w0_reference=float(w0_est),
                           w0_reference_se=float(w0_se), y0=y0)


# ---------------------------------------------------------------------------
# diagnostics used by tests and the selftest command
# ---------------------------------------------------------------------------

def step_residuals(block: PathBlock, pb: PnlBlock, spec: OptionSpec, call: VanillaSpec) -> np.ndarray:
    """Per-step deviation of the hedged P&L increments from their drift prediction:
    Delta Y + b_V(zeta) dt, shape (paths, steps)."""
    from .controls import drift_bV_arrays

    dt = block.times[1] - block.times[0]
    resid = np.diff(pb.Y, axis=1)
    for i in range(block.steps):
        bv = drift_bV_arrays(spec, block.times[i], block.S[:, i], block.A[:, i],
                             block.M[:, i], block.Sigma[:, i], block.zeta[:, :, i])
        resid[:, i] += bv * dt
    return resid
