"""Simulation library for revealing graph bandits (local influence maximization)."""

from .analysis import DetectableProfile, aggregate, detectable_profile, dstar_curve, dual_gap_count
from .environment import (
    FeedbackMode,
    InfluenceSample,
    OracleStats,
    RegretTrace,
    oracle_stats,
    run_episode,
    step,
)
from .errors import ConfigurationError, HarnessError, ParseError, UsageError
from .graph_model import (
    GraphSpec,
    InfluenceMatrix,
    apply_uniform_probability,
    generate,
    load_snap,
    lower_bound_asymmetric,
    lower_bound_symmetric,
)
from .harness import ExperimentConfig, emit_csv, preset, run_experiment
from .policies import Bare, FixedOracle, GraphMOSS, RoundRobin, UniformRandom

__version__ = "0.1.0"
