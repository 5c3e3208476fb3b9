"""Data-generating models, the Monte Carlo engine and normality diagnostics."""

from .adversarial import predicted_distance, predicted_gap, run_be_adversarial, sd_ratio
from .engine import SimConfig, SimReport, run_experiment, run_mse_experiment, run_test_experiment
from .kolmogorov import empirical_kolmogorov, gap_at
from .models import MODELS, Model, generate, make_model, model_names

__all__ = [
    "MODELS", "Model", "SimConfig", "SimReport", "empirical_kolmogorov",
    "gap_at", "generate", "make_model", "model_names", "predicted_distance", "predicted_gap",
    "run_be_adversarial", "run_experiment", "sd_ratio", "run_mse_experiment", "run_test_experiment",
]
