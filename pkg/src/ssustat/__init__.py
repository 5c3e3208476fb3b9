"""Semi-supervised U-statistics.

Estimators that combine a U-statistic on labeled responses with an assistant
function of the covariates evaluated on extra unlabeled rows, together with
rank tests, regressors for the assistant and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .adaptive import (BivariateHooks, build_hooks_density, build_hooks_mu2, build_hooks_oracle,
                       oracle_variance_adapt, u_adapt, u_adapt_oracle)
from .data import (CrossFitSplit, NestedSplit, Schema, SemiDataset, load_dataset, save_dataset,
                   split_crossfit, split_nested)
from .estimators import (Estimate, SemiSupervisedUStatistic, confidence_interval, lambda_hat,
                         u_classical, u_cross, u_oracle, u_plug, u_single)
from .exceptions import (ArityError, ConfigError, DataError, FoldTooSmallError, NumericalFailure,
                         SimulationError, SSUError, UnknownNameError, UnsupportedOperation)
from .kernels import Kernel, eval_kernel, get_kernel, kernel_names, register_kernel
from .infer_tests import (TestResult, kendall_classical, kendall_ss, run_test, wilcoxon_classical,
                         wilcoxon_ss)
from .regress import (KernelRidgeRegressor, KNNRegressor, OLSRegressor, PartitionRegressor,
                      parse_regressor)
from .ustat import jackknife_sigma2, u_statistic

__all__ = [
    "__version__",
    "BivariateHooks",
    "build_hooks_density",
    "build_hooks_mu2",
    "build_hooks_oracle",
    "oracle_variance_adapt",
    "u_adapt",
    "u_adapt_oracle",
    "CrossFitSplit",
    "NestedSplit",
    "Schema",
    "SemiDataset",
    "load_dataset",
    "save_dataset",
    "split_crossfit",
    "split_nested",
    "Estimate",
    "SemiSupervisedUStatistic",
    "confidence_interval",
    "lambda_hat",
    "u_classical",
    "u_cross",
    "u_oracle",
    "u_plug",
    "u_single",
    "ArityError",
    "ConfigError",
    "DataError",
    "FoldTooSmallError",
    "NumericalFailure",
    "SimulationError",
    "SSUError",
    "UnknownNameError",
    "UnsupportedOperation",
    "Kernel",
    "eval_kernel",
    "get_kernel",
    "kernel_names",
    "register_kernel",
    "TestResult",
    "kendall_classical",
    "kendall_ss",
    "run_test",
    "wilcoxon_classical",
    "wilcoxon_ss",
    "KernelRidgeRegressor",
    "KNNRegressor",
    "OLSRegressor",
    "PartitionRegressor",
    "parse_regressor",
    "jackknife_sigma2",
    "u_statistic",
]
