"""Composed fine-tuning workbench.

Minimum-norm spline theory for staircase functions, ReLU networks trained
with and without a frozen denoiser, a score-function estimator for composed
training over discrete outputs, and the SansType toy language.
"""

__version__ = "0.1.0"

from .errors import InvalidInput, InvalidParameter, InvalidState
from .valid_set import ValidSet, project, project_many, adjacency_stats
from .spline import LinearSpline, StaircaseSpec, spline_norm, staircase_std_interpolant, theorem_report
from .relu_net import ReluNet2, complexity, train, TrainConfig
from .composed_training import ComposedConfig, pretrain_denoiser, composed_loss, run_staircase_experiment
from .discrete_composed import (
    CategoricalSeqModel,
    DiscreteConfig,
    DiscreteDenoiser,
    exact_grad,
    make_discrete_task,
    reinforce_grad,
    run_discrete_experiment,
)

__all__ = [
    "CategoricalSeqModel", "ComposedConfig", "DiscreteConfig", "DiscreteDenoiser", "InvalidInput",
    "InvalidParameter", "InvalidState", "LinearSpline", "ReluNet2", "StaircaseSpec", "TrainConfig",
    "ValidSet", "adjacency_stats", "complexity", "composed_loss", "exact_grad", "make_discrete_task",
    "pretrain_denoiser", "project", "project_many", "reinforce_grad", "run_discrete_experiment",
    "run_staircase_experiment", "spline_norm", "staircase_std_interpolant", "theorem_report", "train",
]
