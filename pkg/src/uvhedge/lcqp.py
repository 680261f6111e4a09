"""Closed-form solver for a diagonal QP with one equality and one sign constraint.

Primal problem:

    minimise  0.5 z'Dz - v'z   over z in R^n
    subject to  c'z = 0  and  z_n >= 0,

with D = diag(d_1..d_n) positive and c_i != 0 for some i < n.  The solution is
a two-branch formula: an unconstrained-in-sign projection when it already has
z_n >= 0, otherwise the same projection with the last coordinate priced in via
the multiplier mu.  The sign-constrained coordinate is fixed as the LAST index;
callers permute their data if needed.

``oracle_solve`` is an independent projected-gradient check used by the test
suite; it must not share code with :func:`solve`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, OracleFailure

#: above this diagonal spread the closed form is exact but floating point is not
CONDITION_WARN = 1e8


@dataclass(frozen=True)
class QpInstance:
    d: np.ndarray
    v: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        d, v, c = (np.asarray(x, float) for x in (self.d, self.v, self.c))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "c", c)
        n = d.shape[0]
        if n < 2 or v.shape != (n,) or c.shape != (n,):
            raise ConfigError(f"inconsistent QP dimensions d={d.shape} v={v.shape} c={c.shape}")
        if np.any(d <= 0.0):
            raise ConfigError("all diagonal entries must be strictly positive")
        if not np.any(c[:-1] != 0.0):
            raise ConfigError("c must have a nonzero entry among the first n-1 components")

    @property
    def n(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class QpSolution:
    z_star: np.ndarray
    lambda_star: float
    mu_star: float
    primal_value: float


def solve(instance: QpInstance) -> QpSolution:
    """Optimal primal/dual pair in closed form."""
    d, v, c = instance.d, instance.v, instance.c
    if d.max() / d.min() > CONDITION_WARN:
        warnings.warn(
            f"QP diagonal spread {d.max() / d.min():.3g} exceeds {CONDITION_WARN:.0e}; "
            "expect floating-point noise in the KKT residuals",
            RuntimeWarning,
            stacklevel=2,
        )
    dinv = 1.0 / d
    cDv = float(np.dot(c * dinv, v))
    cDc = float(np.dot(c * dinv, c))
    # branch test: would the plain equality-constrained projection violate z_n >= 0?
    active = v[-1] - (cDv / cDc) * c[-1] < 0.0
    if active:
        den = cDc - c[-1] ** 2 * dinv[-1]
        if den <= 0.0:
            raise DomainError("degenerate constraint: c supported only on the signed coordinate")
        lam = (cDv - c[-1] * v[-1] * dinv[-1]) / den
    else:
        lam = cDv / cDc
    mu = max(-(v[-1] - lam * c[-1]), 0.0)
    r = v - lam * c
    r = r.copy()
    r[-1] += mu
    z = dinv * r
    return QpSolution(z_star=z, lambda_star=float(lam), mu_star=float(mu),
                      primal_value=float(-0.5 * np.dot(v, z)))


def dual_value(instance: QpInstance, lam: float, mu: float) -> float:
    """Concave dual objective; equals the primal value at the optimal multipliers."""
    if mu < 0.0:
        raise DomainError(f"dual feasibility requires mu >= 0, got {mu}")
    r = instance.v - lam * instance.c
    r = r.copy()
    r[-1] += mu
    return float(-0.5 * np.dot(r / instance.d, r))


def kkt_residuals(instance: QpInstance, sol: QpSolution) -> dict:
    """Scaled residuals of stationarity, feasibility and complementary slackness."""
    d, v, c = instance.d, instance.v, instance.c
    z, lam, mu = sol.z_star, sol.lambda_star, sol.mu_star
    scale = max(1.0, float(np.linalg.norm(v)))
    station = d * z - v + lam * c
    station[-1] -= mu
    return {
        "stationarity": float(np.linalg.norm(station)) / scale,
        "equality": abs(float(np.dot(c, z))) / max(1.0, float(np.linalg.norm(c))) / scale,
        "sign": max(0.0, -float(z[-1])) / scale,
        "mu_sign": max(0.0, -mu) / scale,
        "slackness": abs(mu * float(z[-1])) / scale,
    }


def oracle_solve(instance: QpInstance, iterations: int = 20000, step: float | None = None,
                 tol: float = 1e-12) -> QpSolution:
    """Projected-gradient descent on the primal; independent of :func:`solve`.

    Each iteration takes a gradient step, projects onto the hyperplane, clips
    the signed coordinate at zero and, when the clip was active, re-projects on
    the remaining coordinates.  Raises :class:`OracleFailure` when the iterate
    has not settled within the budget; the caller must treat that as
    inconclusive, never as a pass.
    """
    d, v, c = instance.d, instance.v, instance.c
    cc = float(np.dot(c, c))
    cf = c[:-1]
    cfcf = float(np.dot(cf, cf))
    if step is None:
        step = 2.0 / (d.min() + d.max())
    z = np.zeros_like(v)
    for _ in range(iterations):
        z_new = z - step * (d * z - v)
        z_new -= c * (np.dot(c, z_new) / cc)
        if z_new[-1] < 0.0:
            z_new[-1] = 0.0
            z_new[:-1] -= cf * (np.dot(cf, z_new[:-1]) / cfcf)
        if np.max(np.abs(z_new - z)) < tol * max(1.0, np.max(np.abs(z))):
            z = z_new
            break
        z = z_new
    else:
        raise OracleFailure(
            f"projected gradient did not settle within {iterations} iterations "
            f"(last move {np.max(np.abs(z_new - z)):.3e})"
        )
    # multipliers recovered from stationarity on the free coordinates:
    # Dz - v = -lam*c + mu*e_n at the fixed point
    g = d * z - v
    lam = -float(np.dot(g[:-1], cf)) / cfcf
    mu = float(g[-1] + lam * c[-1])
    return QpSolution(z_star=z, lambda_star=lam, mu_star=max(mu, 0.0),
                      primal_value=float(-0.5 * np.dot(v, z)))


def random_instance(rng: np.random.Generator, n: int, spread: float = 100.0) -> QpInstance:
    """Well-conditioned random instance for stress tests (d_max/d_min <= spread)."""
    d = np.exp(rng.uniform(0.0, np.log(spread), size=n))
    d /= d.min()
    v = rng.normal(0.0, 3.0, size=n)
    c = rng.normal(0.0, 1.0, size=n)
    if not np.any(np.abs(c[:-1]) > 1e-12):
        c[0] = 1.0
    return QpInstance(d=d, v=v, c=c)


def solve_batch(d: np.ndarray, v: np.ndarray, c: np.ndarray):
    """Vectorised closed form over a batch of instances (rows).

    Returns (z, lam, mu, primal).  Used by the acceptance suite to run 1e5
    instances within budget; semantics identical to :func:`solve`.
    """
    d, v, c = (np.asarray(x, float) for x in (d, v, c))
    dinv = 1.0 / d
    cDv = np.sum(c * dinv * v, axis=1)
    cDc = np.sum(c * dinv * c, axis=1)
    lam1 = cDv / cDc
    active = v[:, -1] - lam1 * c[:, -1] < 0.0
    den = cDc - c[:, -1] ** 2 * dinv[:, -1]
    lam2 = np.where(den > 0.0, (cDv - c[:, -1] * v[:, -1] * dinv[:, -1]) / np.where(den > 0.0, den, 1.0), np.nan)
    lam = np.where(active, lam2, lam1)
    mu = np.maximum(-(v[:, -1] - lam * c[:, -1]), 0.0)
    r = v - lam[:, None] * c
    r[:, -1] += mu
    z = dinv * r
    primal = -0.5 * np.sum(v * z, axis=1)
    return z, lam, mu, primal


def oracle_solve_batch(d: np.ndarray, v: np.ndarray, c: np.ndarray,
                       iterations: int = 6000, tol: float = 1e-11,
                       check_every: int = 32):
    """Vectorised projected gradient over a batch; returns primal iterates only.

    Instances that have settled are retired from the working set every
    ``check_every`` sweeps, so the long tail of ill-conditioned instances does
    not force full-batch work.
    """
    d, v, c = (np.asarray(x, float) for x in (d, v, c))
    m = d.shape[0]
    out = np.empty_like(v)
    active = np.arange(m)
    z = np.zeros_like(v)
    cf = c.copy()
    cf[:, -1] = 0.0
    cc = np.sum(c * c, axis=1, keepdims=True)
    cfcf = np.maximum(np.sum(cf * cf, axis=1, keepdims=True), 1e-300)
    step = (2.0 / (d.min(axis=1) + d.max(axis=1)))[:, None]
    da, va, ca = d, v, c
    done_iters = 0
    while done_iters < iterations:
        z_prev = z.copy()
        for _ in range(check_every):
            z = z - step * (da * z - va)
            z -= ca * (np.sum(ca * z, axis=1, keepdims=True) / cc)
            neg = z[:, -1] < 0.0
            if np.any(neg):
                z[neg, -1] = 0.0
                sub = z[neg]
                sub -= cf[neg] * (np.sum(cf[neg] * sub, axis=1, keepdims=True) / cfcf[neg])
                z[neg] = sub
        done_iters += check_every
        moved = np.max(np.abs(z - z_prev), axis=1)
        settled = moved < tol * check_every
        if np.any(settled):
            out[active[settled]] = z[settled]
            keep = ~settled
            if not np.any(keep):
                return out
            active = active[keep]
            z = z[keep]
            da, va, ca, cf = da[keep], va[keep], ca[keep], cf[keep]
            cc, cfcf, step = cc[keep], cfcf[keep], step[keep]
    raise OracleFailure(
        f"batched projected gradient left {active.size} instances unsettled "
        f"after {iterations} iterations"
    )
