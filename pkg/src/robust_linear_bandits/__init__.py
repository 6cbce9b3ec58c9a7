"""Robust linear bandits - corruption-robust weighted OFUL, adversaries and experiment harness."""

__version__ = "1.0.0"
__description__ = "Corruption-robust linear contextual bandits with a reproducible experiment harness"

from .exceptions import (
    ConfigurationError,
    ContractError,
    EpisodeError,
    FileSystemError,
    NumericalError,
)
from .linalg import WeightedDesignState, new_design_state
from .environment import BanditInstance, Bounds, generate_round, lower_bound_instance_pair, sample_reward
from .adversary import AdversaryState, corruption_report, lower_bound_adversary
from .policies import PolicyConfig, PolicyKind, PolicyState, build_policy_config
from .harness import EpisodeResult, RegretCurve, aggregate, paired_lower_bound_run, run_episode
from .config import ExperimentConfig, load_config
from .study import ExperimentRunner, scaling_study
from .cli import main

__all__ = [
    "__version__",
    "__description__",
    "ConfigurationError",
    "ContractError",
    "EpisodeError",
    "FileSystemError",
    "NumericalError",
    "WeightedDesignState",
    "new_design_state",
    "BanditInstance",
    "Bounds",
    "generate_round",
    "lower_bound_instance_pair",
    "sample_reward",
    "AdversaryState",
    "corruption_report",
    "lower_bound_adversary",
    "PolicyConfig",
    "PolicyKind",
    "PolicyState",
    "build_policy_config",
    "EpisodeResult",
    "RegretCurve",
    "aggregate",
    "paired_lower_bound_run",
    "run_episode",
    "ExperimentConfig",
    "load_config",
    "ExperimentRunner",
    "scaling_study",
    "main",
]
