"""Cash equivalent of small uncertainty aversion, by PDE and by Monte Carlo.

Both routes integrate the same nonnegative source g (half of it) against the
reference dynamics: a Crank-Nicolson solve of

    w_t + 0.5 Sigma0^2 S^2 w_SS + 0.5 g(t, S, Sigma0) = 0,    w(T, .) = 0,

on a log-price grid, and a plain Monte Carlo of the pathwise time integral
under the constant-vol reference model.  They share nothing numerically, which
is what makes the agreement check meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.linalg import solve_banded

from .analytics import VanillaSpec
from .errors import CapabilityError, ConfigError, InvariantError
from .instruments import OptionSpec, eval_coefficient
from .market import MarketSetup, PenaltyWeights, VolBand
from .vgvv import pipeline

#: fixed number of paths per RNG block; keeps results independent of worker count
MC_BLOCK = 16384


@dataclass(frozen=True)
class PdeGrid:
    """Log-price grid: node count, half-width in terminal standard deviations, time steps."""

    space_nodes: int = 400
    time_steps: int = 400
    span_sd: float = 6.0

    def __post_init__(self):
        if self.space_nodes < 50 or self.time_steps < 50:
            raise ConfigError("PDE grid needs at least 50 space nodes and 50 time steps")
        if self.span_sd < 5.0:
            raise ConfigError("PDE grid must span at least 5 standard deviations")

    def refined(self) -> "PdeGrid":
        return PdeGrid(2 * self.space_nodes, 2 * self.time_steps, self.span_sd)


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    steps: int = 250
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.paths < 1 or self.steps < 1:
            raise ConfigError("Monte Carlo needs at least one path and one step")


@dataclass(frozen=True)
class PdeSolution:
    log_s: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (len(times), len(log_s))
    w0: float


def _is_parity_pair(vanilla: VanillaSpec, call: VanillaSpec) -> bool:
    return vanilla.strike == call.strike and vanilla.maturity == call.maturity


def _reject_kinked(spec: OptionSpec, call: VanillaSpec):
    # a kinked payoff has unbounded vol sensitivities near expiry: the premium
    # integral diverges unless the traded leg cancels it exactly (the parity
    # pair with the call's strike and maturity, where the source vanishes)
    vanilla = spec.vanilla
    if vanilla is not None and vanilla.kind in ("put", "call") \
            and not _is_parity_pair(vanilla, call):
        raise CapabilityError(
            f"target {spec.name!r} has a kinked payoff that does not form the parity pair "
            "with the traded leg; the uncertainty premium is unbounded - use the smoothed variant"
        )


def _source_on_grid(spec, call, weights, t, S, Sigma0):
    pipe = pipeline(spec, call, weights, t, S, np.zeros_like(S), S, np.full_like(S, Sigma0),
                    degenerate="zero")
    return 0.5 * pipe.source


def cash_equivalent_pde(spec: OptionSpec, call: VanillaSpec, weights: PenaltyWeights,
                        band: VolBand, market: MarketSetup,
                        grid: PdeGrid = PdeGrid()) -> PdeSolution:
    """Crank-Nicolson solve on the vol slice Sigma0; returns the surface and w0.

    Only targets whose value surface is free of auxiliary-state dependence are
    eligible; anything else must go through the Monte Carlo route.
    """
    if not spec.s_only:
        raise CapabilityError(
            f"target {spec.name!r} depends on the auxiliary state; the PDE route only handles "
            "(t, S)-only surfaces - use the Monte Carlo route"
        )
    _reject_kinked(spec, call)
    T = spec.maturity
    S0, Sigma0 = market.s0, market.sigma0
    nx, nt = grid.space_nodes, grid.time_steps
    sd = Sigma0 * np.sqrt(T)
    x = np.linspace(np.log(S0) - grid.span_sd * sd, np.log(S0) + grid.span_sd * sd, nx)
    dx = x[1] - x[0]
    dt = T / nt
    S = np.exp(x)
    Si = S[1:-1]
    n = nx - 2

    # generator in log price: 0.5 Sigma0^2 (w_xx - w_x)
    a = 0.5 * Sigma0 * Sigma0
    lower = a / dx ** 2 + a * 0.5 / dx
    diag = -2.0 * a / dx ** 2
    upper = a / dx ** 2 - a * 0.5 / dx

    # banded forms of (I -+ dt/2 L); zero Dirichlet boundaries
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5 * dt * upper
    ab[1, :] = 1.0 - 0.5 * dt * diag
    ab[2, :-1] = -0.5 * dt * lower

    def explicit(w):
        out = (1.0 + 0.5 * dt * diag) * w
        out[:-1] += 0.5 * dt * upper * w[1:]
        out[1:] += 0.5 * dt * lower * w[:-1]
        return out

    eps = 1e-9 * T
    times = np.linspace(0.0, T, nt + 1)
    values = np.zeros((nt + 1, nx))
    w = np.zeros(n)
    f_next = _source_on_grid(spec, call, weights, T - eps, Si, Sigma0)
    for k in range(nt - 1, -1, -1):
        t_k = times[k]
        f_here = _source_on_grid(spec, call, weights, max(t_k, eps), Si, Sigma0)
        rhs = explicit(w) + 0.5 * dt * (f_here + f_next)
        w = solve_banded((1, 1), ab, rhs)
        values[k, 1:-1] = w
        f_next = f_here
    w0 = float(np.interp(np.log(S0), x, values[0]))
    if w0 < -1e-12 * max(1.0, abs(w0)):
        raise InvariantError(f"cash equivalent came out negative ({w0}); source must be >= 0")
    return PdeSolution(log_s=x, times=times, values=values, w0=w0)


def _block_seed(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def reference_paths(spec: OptionSpec, market: MarketSetup, paths: int, steps: int,
                    rng: np.random.Generator, T: float, antithetic: bool = False):
    """Generator over time steps of reference-model states (constant vol Sigma0).

    Yields (index, t, S, A, M, dS, dM) per step with S/A/M the left-endpoint
    states and dS/dM the increments over the step.
    """
    dt = T / steps
    sdt = np.sqrt(dt)
    S0, Sigma0 = market.s0, market.sigma0
    a0 = market.initial_auxiliary(spec)
    S = np.full(paths, S0)
    A = np.full(paths, a0)
    M = np.full(paths, S0)
    for i in range(steps):
        t = i * dt
        z = rng.standard_normal(paths)
        if antithetic:
            half = paths // 2
            z[half:2 * half] = -z[:half]
        S_new = S * np.exp(-0.5 * Sigma0 * Sigma0 * dt + Sigma0 * sdt * z)
        M_new = np.maximum(M, S_new)
        alpha = eval_coefficient(spec.alpha, t, S, A, M)
        beta = eval_coefficient(spec.beta, t, S, A, M)
        gamma = eval_coefficient(spec.gamma, t, S, A, M)
        delta = eval_coefficient(spec.delta, t, S, A, M)
        dS = S_new - S
        dM = M_new - M
        A_new = A + (alpha + 0.5 * Sigma0 * Sigma0 * beta) * dt + gamma * dS + delta * dM
        yield i, t, S, A, M, dS, dM
        S, A, M = S_new, A_new, M_new


def cash_equivalent_mc(spec: OptionSpec, call: VanillaSpec, weights: PenaltyWeights,
                       band: VolBand, market: MarketSetup,
                       mc: McConfig = McConfig()):
    """Pathwise premium estimate: half the time integral of the source, averaged.

    Left-endpoint rule in time; per-block seeding derived from (seed, block
    index) makes the estimate bit-identical for a fixed config regardless of
    how blocks are scheduled.  Returns (estimate, stderr).
    """
    _reject_kinked(spec, call)
    T = spec.maturity
    dt = T / mc.steps
    total = 0.0
    total_sq = 0.0
    done = 0
    block = 0
    while done < mc.paths:
        npaths = min(MC_BLOCK, mc.paths - done)
        rng = _block_seed(mc.seed, block)
        acc = np.zeros(npaths)
        for _, t, S, A, M, _, _ in reference_paths(spec, market, npaths, mc.steps, rng, T,
                                                   mc.antithetic):
            pipe = pipeline(spec, call, weights, t, S, A, M,
                            np.full(npaths, market.sigma0), degenerate="zero")
            acc += pipe.source * dt
        acc *= 0.5
        total += float(acc.sum())
        total_sq += float(np.dot(acc, acc))
        done += npaths
        block += 1
    mean = total / mc.paths
    if mc.paths > 1:
        var = max(total_sq - mc.paths * mean * mean, 0.0) / (mc.paths - 1)
        stderr = float(np.sqrt(var / mc.paths))
    else:
        stderr = float("nan")
    if mean < -1e-12:
        raise InvariantError(f"cash equivalent came out negative ({mean}); source must be >= 0")
    return mean, stderr


def indifference_ask(v0: float, w0: float, psi: float) -> float:
    """First-order selling price: reference value plus the uncertainty premium.

    The truncation is first order by construction; higher-order terms are not
    estimated.
    """
    if not np.isfinite(v0) or not np.isfinite(w0):
        raise ConfigError(f"need finite inputs, got v0={v0}, w0={w0}")
    if w0 < 0.0:
        raise InvariantError(f"cash equivalent must be nonnegative, got {w0}")
    if psi < 0.0:
        raise ConfigError(f"uncertainty aversion cannot be negative, got {psi}")
    return v0 + w0 * psi
