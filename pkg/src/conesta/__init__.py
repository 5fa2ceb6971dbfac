"""Logistic regression with l1, l2 and 3D total-variation penalties, fitted by CONESTA."""
from .continuation import FitResult, conesta_fit, init_beta, mu_opt, objective_exact, objective_smoothed
from .fista import FistaConfig, FistaResult, fista_run, fista_step_size
from .grid import GradientOperator, MaskedVolume, build_operator, power_iteration
from .model import Dataset, logistic_loss_value_gradient, predict_proba, smooth_part_lipschitz
from .penalties import PenaltyWeights

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FistaConfig",
    "FistaResult",
    "FitResult",
    "GradientOperator",
    "MaskedVolume",
    "PenaltyWeights",
    "build_operator",
    "conesta_fit",
    "fista_run",
    "fista_step_size",
    "init_beta",
    "logistic_loss_value_gradient",
    "mu_opt",
    "objective_exact",
    "objective_smoothed",
    "power_iteration",
    "predict_proba",
    "smooth_part_lipschitz",
]
