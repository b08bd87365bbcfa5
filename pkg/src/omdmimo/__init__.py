"""
Opportunistic multiuser detection for the MIMO Gaussian interference channel.

Rate-optimal transmit covariances for a user whose receiver decodes
interfering messages whenever their rates allow, with single-user decoding
(interference as noise) as the fallback, plus a Monte-Carlo harness for the
resulting decentralized best-response dynamics. All rates are in nats.
"""

from .errors import (
    BisectionFailed,
    ConfigError,
    DimensionMismatch,
    InfeasibleCovariance,
    MaxIterExceeded,
    NonPositiveDefinite,
    OmdError,
    OrderNotFound,
)
from .linalg import logdet, whiten
from .multi_user import (
    DecodableSet,
    KUserSolution,
    extract_decode_order,
    find_optimal_decodable_set,
    solve_p4,
)
from .rates import (
    Branch,
    MacRegionSpec,
    Regime,
    ThresholdSet,
    TwoUserContext,
    classify_regime,
    mac_member,
    omd_rate,
    thresholds,
)
from .simulation import (
    RunRecord,
    ScenarioConfig,
    Sweep,
    draw_channels,
    preset,
    run_protocol,
    run_scenario,
    simulate,
)
from .subproblem import LogDetObjective, project_psd_trace, solve
from .two_user import TwoUserSolution, bisect_mu1, solve_p1
from .waterfilling import WaterfillResult, sud_best_response, waterfill

__version__ = "0.1.0"
