"""Multi-user MIMO downlink with pattern-reconfigurable transmit antennas.

Submodules
----------
numerics     Hermitian eigen/SVD kernels and PSD helpers.
patterns     Radiation pattern sets and their correlation.
channel      Clustered channel model and candidate channel pools.
precoding    Fixed analog precoder, BD/RBD and the sum rate.
mode_select  Exhaustive and heuristic antenna mode selection.
estimation   LS/MMSE estimation and prediction of untrained modes.
harness      Seeded experiment sweeps and the command line interface.
"""

from .channel import SystemConfig, build_candidate_pool, compose_channel, sample_propagation
from .estimation import MMSEChannelEstimator, TrainingModeSelector, TrainingPlan
from .exceptions import (
    BudgetExceededError,
    ConfigError,
    ContractViolation,
    InfeasibleError,
    SingularMatrixError,
)
from .mode_select import ModeSelector, exhaustive_mode_search, heuristic_mode_search
from .patterns import PatternSet, generate_pattern_set
from .precoding import bd_precoder, fixed_rf_precoder, rbd_precoder, sum_rate

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "ConfigError",
    "ContractViolation",
    "InfeasibleError",
    "MMSEChannelEstimator",
    "ModeSelector",
    "PatternSet",
    "SingularMatrixError",
    "SystemConfig",
    "TrainingModeSelector",
    "TrainingPlan",
    "bd_precoder",
    "build_candidate_pool",
    "compose_channel",
    "exhaustive_mode_search",
    "fixed_rf_precoder",
    "generate_pattern_set",
    "heuristic_mode_search",
    "rbd_precoder",
    "sample_propagation",
    "sum_rate",
]
