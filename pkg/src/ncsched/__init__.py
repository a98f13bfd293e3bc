"""Networked control simulation with learned control-aware channel scheduling.

N independent linear control loops share M < N communication channels.
Each loop runs a sensor-side Kalman filter and a certainty-equivalent
LQG controller; a scheduler decides, stage by stage, which loops may
close their feedback over the network.  The package provides the
simulator, an exact expected-loss oracle for fixed schedules, classical
scheduling baselines, and a DQN scheduler trained on the stacked
sensor/controller estimate errors.
"""

__version__ = "0.1.0"

from .baselines import (
    PeriodicSchedule,
    exhaustive_periodic_search,
    expected_schedule_loss,
    greedy_error,
    random_schedule,
    round_robin,
)
from .config import ExperimentConfig, load_experiment
from .control import GainSchedule, closed_form_baseline_loss, riccati_backward
from .env import EnvConfig, SchedulingEnv, allocation_fractions, build_gain_schedules
from .errors import (
    BudgetExceeded,
    BufferNotReady,
    CheckpointMismatch,
    ConfigError,
    ContractViolation,
    NumericalFailure,
    TrainingFailure,
)
from .estimation import filter_covariances
from .experiments import (
    Trainer,
    evaluate_policy,
    run_monte_carlo,
    run_training,
    stability_diagnostic,
)
from .montecarlo import simulate_schedule
from .plants import PlantState, SubsystemSpec, spectral_radius

__all__ = [
    "BudgetExceeded",
    "BufferNotReady",
    "CheckpointMismatch",
    "ConfigError",
    "ContractViolation",
    "EnvConfig",
    "ExperimentConfig",
    "GainSchedule",
    "NumericalFailure",
    "PeriodicSchedule",
    "PlantState",
    "SchedulingEnv",
    "SubsystemSpec",
    "Trainer",
    "TrainingFailure",
    "allocation_fractions",
    "build_gain_schedules",
    "closed_form_baseline_loss",
    "evaluate_policy",
    "exhaustive_periodic_search",
    "expected_schedule_loss",
    "filter_covariances",
    "greedy_error",
    "load_experiment",
    "random_schedule",
    "riccati_backward",
    "round_robin",
    "run_monte_carlo",
    "run_training",
    "simulate_schedule",
    "spectral_radius",
    "stability_diagnostic",
]
