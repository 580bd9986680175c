"""Kalman filter noise-covariance auto-tuning toolkit.

Builds chi-squared moment-matching consistency costs from Monte Carlo filter
runs and minimizes them with Student-t-process Bayesian optimization across
multiple sample intervals; ships Gaussian-process and downhill-simplex
baselines plus the benchmark systems to compare them on.
"""

from .acquisition import (DirectConfig, SearchSpace, direct_maximize,
                          expected_improvement, student_t_cdf, student_t_pdf)
from .benchmarks import BenchmarkSpec, build
from .consistency import (ChiSquareBounds, ConsistencyReport, ConsistencyStats, aggregate,
                          c_metric, chi2_bounds, consistency_report, j_metric, multi_dt_cost,
                          nees, nis, quad_form_moments, v_metric)
from .errors import NumericalError
from .kalman import InnovationRecord, StateEstimate, predict, update
from .montecarlo import (ControlSignal, RunLog, SimConfig, derive_seed, filter_batch,
                         monte_carlo_runs, noise_stream, run_filter, runlog_to_csv,
                         simulate_batch, simulate_truth)
from .statespace import ContinuousModel, DiscreteModel, discretize, matrix_exponential
from .tprocess import (KernelParams, PosteriorPrediction, SurrogateState, build_state,
                       fit_hyperparams, kernel_eval, kernel_matrix, log_marginal, posterior)
from .tuner import (HistoryEntry, TuneProblem, TuneResult, benchmark_problem, evaluate_cost,
                    per_interval_costs, tune_gpbo_baseline, tune_nelder_mead, tune_tpbo,
                    write_history_csv)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkSpec", "ChiSquareBounds", "ConsistencyReport", "ConsistencyStats",
    "ContinuousModel", "ControlSignal", "DirectConfig", "DiscreteModel", "HistoryEntry",
    "InnovationRecord", "KernelParams", "NumericalError", "PosteriorPrediction", "RunLog",
    "SearchSpace", "SimConfig", "StateEstimate", "SurrogateState", "TuneProblem", "TuneResult",
    "aggregate", "benchmark_problem", "build", "build_state", "c_metric", "chi2_bounds",
    "consistency_report", "derive_seed", "direct_maximize", "discretize", "evaluate_cost",
    "expected_improvement", "filter_batch", "fit_hyperparams", "j_metric", "kernel_eval",
    "kernel_matrix", "log_marginal", "matrix_exponential", "monte_carlo_runs", "multi_dt_cost",
    "nees", "nis", "noise_stream", "per_interval_costs", "posterior", "predict",
    "quad_form_moments", "run_filter", "runlog_to_csv", "simulate_batch", "simulate_truth",
    "student_t_cdf", "student_t_pdf", "tune_gpbo_baseline", "tune_nelder_mead", "tune_tpbo",
    "update", "v_metric", "write_history_csv",
]
