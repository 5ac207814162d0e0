"""Max-min secrecy power control for downlink cell-free massive MIMO with artificial noise."""

from .baselines import SCHEMES, heuristic_init, run_heuristic_only, run_maxmin_rate, run_no_an, run_proposed
from .channel import ChannelStats, PilotConfig, draw_channels, estimate_channels, lmmse_stats
from .experiments import (
    ExperimentFailure,
    ExperimentResult,
    ExperimentSpec,
    empirical_cdf,
    outage_probability,
    run_experiment,
    stochastic_dominance_check,
)
from .network import ConfigurationError, DeploymentConfig, NetworkRealization, deploy, path_loss
from .optimizer import ScaConfig, ScaTrace, SolverFailure, run_sca
from .rates import (
    PowerAllocation,
    RateReport,
    leakage_rate_bound,
    mc_validate_leakage,
    mc_validate_user_rate,
    secrecy_report,
    sinr_terms,
    user_rate_bound,
)

__version__ = "0.1.0"
