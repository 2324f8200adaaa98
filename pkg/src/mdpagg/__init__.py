"""State aggregation experiments for optimal-stopping MDPs.

Build the ground-truth deteriorating chain, aggregate it, estimate it from
simulated trajectories, and measure what the estimated policies cost.
"""
__version__ = "0.1.0"

from .aggregation import (
    Partition,
    aggregate_model,
    aggregate_rewards,
    aggregate_tpm,
    build_partition,
    modified_stationary,
    unaggregate_policy,
)
from .estimation import (
    mle_aggregated,
    mle_full,
    read_counts_csv,
    simulate_trajectories,
    write_counts_csv,
)
from .groundtruth import (
    ChainParams,
    build_intervention_tpm,
    build_model,
    build_natural_tpm,
    build_rewards,
)
from .mdp import MdpModel, evaluate_policy, q_value, solve_optimal
from .structure import (
    check_aggregation_preconditions,
    check_threshold_conditions,
    gray_area,
    is_dfr,
    is_threshold,
)

__all__ = [
    "MdpModel",
    "evaluate_policy",
    "q_value",
    "solve_optimal",
    "Partition",
    "aggregate_model",
    "aggregate_rewards",
    "aggregate_tpm",
    "build_partition",
    "modified_stationary",
    "unaggregate_policy",
    "mle_aggregated",
    "mle_full",
    "read_counts_csv",
    "simulate_trajectories",
    "write_counts_csv",
    "ChainParams",
    "build_intervention_tpm",
    "build_model",
    "build_natural_tpm",
    "build_rewards",
    "check_aggregation_preconditions",
    "check_threshold_conditions",
    "gray_area",
    "is_dfr",
    "is_threshold",
]
