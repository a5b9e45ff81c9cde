"""Sliding-manipulation toolkit: maneuver kinematics, stick-slip simulation,
friction estimation and a reinforcement-learned maneuver policy."""

from .dynamics import FrictionModel, SlideResult, sample_relative_trace, simulate_closed_form
from .environment import EnvParams, SlidingEnv, Stage
from .errors import SlideError
from .estimation import (
    AnalyticalFrictionEstimator,
    EstimateInput,
    FrictionDataset,
    LstmFrictionRegressor,
    correction_metric,
    gen_dataset,
)
from .maneuver import (
    ManeuverAction,
    RawAction,
    VelocityProfile,
    build_velocity_profile,
    range_of_motion,
    sample_profile,
    validate_action,
)
from .optimal import OptimalController, optimal_action

__version__ = "0.1.0"

__all__ = [
    "AnalyticalFrictionEstimator", "EnvParams", "EstimateInput", "FrictionDataset",
    "FrictionModel", "LstmFrictionRegressor", "ManeuverAction", "OptimalController",
    "RawAction", "SlideError", "SlideResult", "SlidingEnv", "Stage", "VelocityProfile",
    "build_velocity_profile", "correction_metric", "gen_dataset", "optimal_action",
    "range_of_motion", "sample_profile", "sample_relative_trace", "simulate_closed_form",
    "validate_action", "__version__",
]
