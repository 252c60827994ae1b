"""Utility-driven practice-mode selection for simulated piano learners.

The package learns, per learner, how useful each practice mode is for a
given task via exact Gaussian-process regression, picks the mode with the
highest expected utility, and reproduces the simulated convergence
experiments end to end (library, CLI, HTTP service).
"""

from .gp import GpModel, KernelParams, NumericalError, Posterior, fit_hyperparameters, gram_matrix, matern52
from .learners import LearnerGroup, PerformanceError, SimConfig, calc_utility, noise_free_utility, performance_error
from .policy import (
    DegenerateMetricError,
    ExperimentResult,
    GpConfig,
    PolicyGrid,
    TrainingTrace,
    get_practice_mode,
    ground_truth_policy,
    policy_loss,
    run_experiment,
    train,
)
from .tasks import (
    Hand,
    InvalidStateError,
    Note,
    PracticeMode,
    TargetTask,
    TaskData,
    TaskParameters,
    TaskSampler,
    apply_practice_mode,
    build_target_task,
    encode,
    generate_score,
)

__version__ = "0.1.0"
