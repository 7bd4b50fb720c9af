"""Exact engine for strategy dynamics on two-group service platforms.

Providers from a dominant and a marginalised group choose high- or
low-effort service under a quota-based recommendation policy and biased
user ratings; the package computes selection probabilities, expected
utilities, the imitation Markov chain and its stationary distribution
exactly, plus the evaluation metrics and experiment drivers built on them.
"""

__version__ = "0.1.0"

from .domain import (EconomicParams, EvolutionParams, ModelConfig,
                     PlatformPolicy, ProviderPopulation, State,
                     UserPopulation, ValidationError, config_from_dict,
                     config_from_json, state_from_index, state_index,
                     validate)
from .metrics import MetricsReport, evaluate

__all__ = [
    "EconomicParams", "EvolutionParams", "MetricsReport", "ModelConfig",
    "PlatformPolicy", "ProviderPopulation", "State", "UserPopulation",
    "ValidationError", "config_from_dict", "config_from_json", "evaluate",
    "state_from_index", "state_index", "validate", "__version__",
]
