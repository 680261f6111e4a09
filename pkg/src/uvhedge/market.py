"""Market state and shared container types."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class MarketState:
    """Point (t, S, A, M, Sigma): time, stock, auxiliary state, running max, implied vol.

    ``A`` tracks exotic features of the non-traded option (average, reset value,
    realised variance); ``M`` is the running maximum of the stock.
    """

    t: float
    S: float
    A: float = 0.0
    M: float = 0.0
    Sigma: float = 0.2

    def __post_init__(self):
        if self.S <= 0.0:
            raise DomainError(f"stock price must be positive, got {self.S}")
        if self.Sigma <= 0.0:
            raise DomainError(f"implied vol must be positive, got {self.Sigma}")


@dataclass(frozen=True)
class VolBand:
    """Implied-vol corridor; outside the open band every control falls back to reference."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi):
            raise DomainError(f"need 0 < lo < hi, got [{self.lo}, {self.hi}]")

    def contains(self, Sigma):
        import numpy as np

        return (np.asarray(Sigma) > self.lo) & (np.asarray(Sigma) < self.hi)


@dataclass(frozen=True)
class ControlBox:
    """Coordinate bounds of the admissible model family."""

    nu_lo: float = -2.0
    nu_hi: float = 2.0
    sigma_lo: float = 0.01
    sigma_hi: float = 1.0
    eta_lo: float = -2.0
    eta_hi: float = 2.0
    xi_hi: float = 2.0

    def contains(self, ctrl) -> bool:
        import numpy as np

        nu, sigma, eta, xi = ctrl
        return bool(
            np.all(nu >= self.nu_lo) and np.all(nu <= self.nu_hi)
            and np.all(sigma >= self.sigma_lo) and np.all(sigma <= self.sigma_hi)
            and np.all(eta >= self.eta_lo) and np.all(eta <= self.eta_hi)
            and np.all(xi >= 0.0) and np.all(xi <= self.xi_hi)
        )


@dataclass(frozen=True)
class MarketSetup:
    """Initial market point plus the band/box of the admissible model family.

    ``a0`` left unset defers to the target's own initial-auxiliary policy
    (e.g. the forward start pins it to the initial stock price).
    """

    s0: float
    sigma0: float
    a0: "float | None" = None
    band: VolBand = VolBand(0.05, 0.60)
    box: ControlBox = ControlBox()

    def __post_init__(self):
        if self.s0 <= 0.0 or self.sigma0 <= 0.0:
            raise DomainError("need positive initial stock price and vol")
        if not (self.band.lo < self.sigma0 < self.band.hi):
            raise DomainError(
                f"initial vol {self.sigma0} must lie inside the band ({self.band.lo}, {self.band.hi})"
            )

    def initial_auxiliary(self, spec) -> float:
        return self.a0 if self.a0 is not None else float(spec.a0(self.s0))


@dataclass(frozen=True)
class PenaltyWeights:
    """Diagonal weights of the quadratic model-deviation penalty.

    The four entries scale the adversary's freedom in the vol drift, spot vol,
    correlated vol-of-vol and uncorrelated squared vol-of-vol directions; the
    overall aversion scale enters separately as ``psi`` in the control/objective
    functions.
    """

    psi_nu: float = 1.0
    psi_sigma: float = 1.0
    psi_eta: float = 1.0
    psi_xi: float = 1.0

    def __post_init__(self):
        for name in ("psi_nu", "psi_sigma", "psi_eta", "psi_xi"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be strictly positive")

    def diagonal(self):
        import numpy as np

        return np.array([self.psi_nu, self.psi_sigma, self.psi_eta, self.psi_xi])

    @property
    def max_weight(self) -> float:
        return max(self.psi_nu, self.psi_sigma, self.psi_eta, self.psi_xi)

    def scaled(self, s: float) -> "PenaltyWeights":
        return PenaltyWeights(self.psi_nu * s, self.psi_sigma * s, self.psi_eta * s, self.psi_xi * s)
