"""Metrics, analytic error recursions, theory checks and Monte-Carlo oracles."""
from .analytic import AnalyticMseState, analytic_curve, analytic_step, initial_state, simulate_batched_td, switch_curves
from .metrics import auc, intervals_separated, mean_ci, offtask_mse, rmsve
from .montecarlo import MonteCarloEstimate, monte_carlo_value, mrp_monte_carlo
from .theory import (
    adaptation_error,
    crossover_bound,
    family_crossover_bound,
    jumpstart_argmin,
    jumpstart_value,
    permanent_fixed_point_run,
    retention_curve,
)

__all__ = [
    "AnalyticMseState",
    "MonteCarloEstimate",
    "adaptation_error",
    "analytic_curve",
    "analytic_step",
    "auc",
    "crossover_bound",
    "family_crossover_bound",
    "initial_state",
    "intervals_separated",
    "jumpstart_argmin",
    "jumpstart_value",
    "mean_ci",
    "monte_carlo_value",
    "mrp_monte_carlo",
    "offtask_mse",
    "permanent_fixed_point_run",
    "retention_curve",
    "rmsve",
    "simulate_batched_td",
    "switch_curves",
]
