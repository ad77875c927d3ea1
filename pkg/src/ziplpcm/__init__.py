"""Zero-inflated Poisson latent position cluster models for weighted networks."""

from .mfm import MfmWeightTable, get_table, log_partition_pmf, log_urn_weights
from .model import Hyperparameters, LatentState
from .netdata import NetworkFormatError, NodeAttributes, WeightedNetwork, load_attributes, load_network
from .partition import canonical
from .sampler import ChainTrace, SamplerConfig, run_chain

__version__ = "0.1.0"

__all__ = [
    "MfmWeightTable", "get_table", "log_partition_pmf", "log_urn_weights", "Hyperparameters",
    "LatentState", "NetworkFormatError", "NodeAttributes", "WeightedNetwork", "load_attributes",
    "load_network", "canonical", "ChainTrace", "SamplerConfig", "run_chain",
]
