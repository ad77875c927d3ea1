"""Partially collapsed Metropolis-within-Gibbs sampler."""

from .adapt import adapt_proposals
from .chain import ChainTrace, SamplerConfig, initial_state, run_chain, spawn_streams
from .init import classical_mds, geodesic_distances, init_partition, init_positions
from .steps import (PHASES, PartitionContext, StepOrderError, Sweep, step_beta, step_nu, step_P,
                    step_tae, step_U, step_X, step_z, unusual_zero_probs)
from .tae import log_p0, p0_value, solve_tae_a, tae_tables

__all__ = [
    "adapt_proposals", "ChainTrace", "SamplerConfig", "initial_state", "run_chain", "spawn_streams",
    "classical_mds", "geodesic_distances", "init_partition", "init_positions", "PHASES",
    "PartitionContext", "StepOrderError", "Sweep", "step_beta", "step_nu", "step_P", "step_tae",
    "step_U", "step_X", "step_z", "unusual_zero_probs", "log_p0", "p0_value", "solve_tae_a",
    "tae_tables",
]
