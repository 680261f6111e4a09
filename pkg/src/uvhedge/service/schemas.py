"""Pydantic request/response models; the single source of config validation.

Every block re-validates the core-module invariants at parse time so that a
bad TOML file or HTTP payload fails with a field-path message before any
computation starts.
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .. import __version__
from ..analytics import VanillaSpec
from ..cashequiv import McConfig, PdeGrid
from ..errors import ConfigError
from ..instruments import OptionSpec, builtin_target, negate
from ..market import ControlBox, MarketSetup, PenaltyWeights, VolBand
from ..simulator import Utility

_VANILLA = ("call", "put", "smooth-put", "power", "log-contract")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BandBlock(StrictModel):
    lo: float = Field(gt=0)
    hi: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.lo >= self.hi:
            raise ValueError(f"band.lo ({self.lo}) must be below band.hi ({self.hi})")
        return self


class BoxBlock(StrictModel):
    nu_lo: float = -2.0
    nu_hi: float = 2.0
    sigma_lo: float = Field(0.01, gt=0)
    sigma_hi: float = 1.0
    eta_lo: float = -2.0
    eta_hi: float = 2.0
    xi_hi: float = Field(2.0, gt=0)


class MarketBlock(StrictModel):
    s0: float = Field(gt=0)
    sigma0: float = Field(gt=0)
    a0: Optional[float] = None
    band: BandBlock
    box: BoxBlock = BoxBlock()

    @model_validator(mode="after")
    def _sigma_in_band(self):
        if not (self.band.lo < self.sigma0 < self.band.hi):
            raise ValueError(f"sigma0 ({self.sigma0}) must lie inside the band "
                             f"({self.band.lo}, {self.band.hi})")
        return self

    def to_market(self) -> MarketSetup:
        return MarketSetup(
            s0=self.s0, sigma0=self.sigma0, a0=self.a0,
            band=VolBand(self.band.lo, self.band.hi),
            box=ControlBox(self.box.nu_lo, self.box.nu_hi, self.box.sigma_lo,
                           self.box.sigma_hi, self.box.eta_lo, self.box.eta_hi,
                           self.box.xi_hi),
        )


class CallBlock(StrictModel):
    kind: Literal["call", "put", "smooth-put", "power", "log-contract"] = "call"
    maturity: float = Field(gt=0)
    strike: Optional[float] = Field(None, gt=0)
    exponent: float = 0.5

    @model_validator(mode="after")
    def _strike_where_needed(self):
        if self.kind in ("call", "put", "smooth-put") and self.strike is None:
            raise ValueError(f"{self.kind} needs a strike")
        return self

    def to_vanilla(self) -> VanillaSpec:
        return VanillaSpec(self.kind, maturity=self.maturity, strike=self.strike,
                           exponent=self.exponent)


class TargetBlock(StrictModel):
    kind: Literal["call", "put", "smooth-put", "power", "log-contract", "forward-start"]
    maturity: float = Field(gt=0)
    strike: Optional[float] = Field(None, gt=0)
    exponent: float = 0.5
    t_reset: Optional[float] = Field(None, gt=0)
    short: bool = False  # hedge the bought option (-V) instead of the sold one

    @model_validator(mode="after")
    def _consistent(self):
        if self.kind in ("call", "put", "smooth-put") and self.strike is None:
            raise ValueError(f"{self.kind} needs a strike")
        if self.kind == "forward-start":
            if self.t_reset is None:
                raise ValueError("forward-start needs t_reset")
            if not (0.0 < self.t_reset < self.maturity):
                raise ValueError("t_reset must lie strictly inside (0, maturity)")
        return self

    def to_target(self) -> OptionSpec:
        spec = builtin_target(self.kind, self.maturity, strike=self.strike,
                              exponent=self.exponent, t_reset=self.t_reset)
        return negate(spec) if self.short else spec


class PenaltyBlock(StrictModel):
    psi_nu: float = Field(1.0, gt=0)
    psi_sigma: float = Field(1.0, gt=0)
    psi_eta: float = Field(1.0, gt=0)
    psi_xi: float = Field(1.0, gt=0)
    psi: float = Field(0.0, ge=0)
    psi_grid: Optional[List[float]] = None

    @model_validator(mode="after")
    def _grid_positive(self):
        if self.psi_grid is not None:
            if len(self.psi_grid) < 4:
                raise ValueError("psi_grid needs at least 4 points")
            if any(p <= 0 for p in self.psi_grid):
                raise ValueError("psi_grid entries must be positive")
        return self

    def to_weights(self) -> PenaltyWeights:
        return PenaltyWeights(self.psi_nu, self.psi_sigma, self.psi_eta, self.psi_xi)


class UtilityBlock(StrictModel):
    kind: Literal["exponential", "shifted-power"] = "exponential"
    a: float = Field(1.0, gt=0)
    shift: float = 10.0

    def to_utility(self) -> Utility:
        return Utility(kind=self.kind, a=self.a, shift=self.shift)


class PdeBlock(StrictModel):
    space_nodes: int = Field(400, ge=50)
    time_steps: int = Field(400, ge=50)
    span_sd: float = Field(6.0, ge=5.0)

    def to_grid(self) -> PdeGrid:
        return PdeGrid(self.space_nodes, self.time_steps, self.span_sd)


class McBlock(StrictModel):
    paths: int = Field(100_000, ge=1)
    steps: int = Field(250, ge=1)
    seed: int = 0
    antithetic: bool = False

    def to_mc(self) -> McConfig:
        return McConfig(paths=self.paths, steps=self.steps, seed=self.seed,
                        antithetic=self.antithetic)


class NumericsBlock(StrictModel):
    pde: PdeBlock = PdeBlock()
    mc: McBlock = McBlock()
    #: separate resolution for P&L sweeps; defaults to ``mc`` when omitted
    sweep: Optional[McBlock] = None

    def sweep_mc(self) -> McConfig:
        return (self.sweep or self.mc).to_mc()


class ExperimentConfig(StrictModel):
    market: MarketBlock
    call: CallBlock
    target: TargetBlock
    penalty: PenaltyBlock = PenaltyBlock()
    utility: UtilityBlock = UtilityBlock()
    numerics: NumericsBlock = NumericsBlock()

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls.model_validate(raw)
        except Exception as exc:  # pydantic.ValidationError
            raise ConfigError(_format_validation(exc)) from exc


def _format_validation(exc) -> str:
    errors = getattr(exc, "errors", None)
    if errors is None:
        return str(exc)
    lines = []
    for err in errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "invalid configuration: " + "; ".join(lines)


# ---------------------------------------------------------------------------
# request / response envelopes
# ---------------------------------------------------------------------------

class PriceRequest(StrictModel):
    config: ExperimentConfig
    route: Literal["auto", "pde", "mc"] = "auto"


class CashEquivRequest(StrictModel):
    config: ExperimentConfig
    route: Literal["pde", "mc", "both"] = "both"
    refine: bool = False


class SweepRequest(StrictModel):
    config: ExperimentConfig
    psi_grid: Optional[List[float]] = None
    challenger: bool = False


class HedgeSimRequest(StrictModel):
    config: ExperimentConfig
    psi: Optional[float] = None


class SelftestRequest(StrictModel):
    corrupt: Optional[str] = None


class Report(BaseModel):
    command: str
    version: str = __version__
    config_hash: str = ""
    seed: int = 0
    results: dict = {}
    timings: dict = {}

    def numeric_payload(self) -> bytes:
        """Canonical bytes of the numeric results; identical across replays."""
        return json.dumps(self.results, sort_keys=True).encode()
