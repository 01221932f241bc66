"""SLOPE: sorted-L1 penalized regression with BH-derived weights."""
from .estimators import (
    fdr_hard_threshold,
    one_step_oracle,
    sequential_fdr_soft,
    slope_orthogonal,
    sure_soft_threshold,
)
from .simulation import ExperimentConfig, SignalSpec, run_experiment
from .solver import SlopeFit, SolverOptions, duality_gap, fit_reduced_slope, fit_slope, lasso_fit
from .sorted_l1 import majorizes, prox_norm_bound_holds, prox_sorted_l1, sorted_l1_norm
from .weights import bh_weights, normal_quantile, sqrtlog_weights, weight_energy

__version__ = "0.1.0"
