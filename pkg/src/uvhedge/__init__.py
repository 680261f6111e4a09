"""Delta-vega hedging under small aversion to misspecification of a recalibrated
Black-Scholes model: hedge ratios, worst-case model perturbations, uncertainty
premia, and the simulation harness that verifies the first-order expansion."""

__version__ = "0.1.0"

from .analytics import GreekBundle, VanillaSpec, european_greeks, european_value, forward_start_value, pde_residual
from .cashequiv import McConfig, PdeGrid, cash_equivalent_mc, cash_equivalent_pde, indifference_ask
from .controls import (
    ControlVector,
    candidate_control,
    drift_bC,
    drift_bV,
    modified_control,
    nu_hat,
    reference_control,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateVegaError,
    DomainError,
    InvariantError,
    OracleFailure,
    UvhedgeError,
)
from .instruments import OptionSpec, builtin_target, forward_start_target, negate, vanilla_target
from .lcqp import QpInstance, QpSolution, dual_value, oracle_solve, solve
from .market import ControlBox, MarketSetup, MarketState, PenaltyWeights, VolBand
from .simulator import (
    HedgePosition,
    Utility,
    delta_vega_hedge,
    expansion_report,
    objective,
    penalty,
    pnl,
    simulate,
)
from .vgvv import VgvvVector, call_vgvv, effective_greeks, lagrange_pair, option_vgvv, source_term, zeta_tilde
