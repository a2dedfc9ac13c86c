"""Sparse linear bandits in the data-poor regime.

Optimal designs, a coordinate-descent Lasso, the ESTC / restricted phased
elimination / LinUCB policies, the hard lower-bound instance and a seeded
experiment harness.
"""
from .core import (ActionSet, ContextSequence, RegretTrajectory, RngStream, SparseInstance,
                   load_problem, optimal_action, sample_reward, save_problem, suboptimality_gap)
from .design import (DesignCertificate, DesignDistribution, EOptimalDesign, GOptimalDesign,
                     c_min, solve_e_optimal, solve_g_optimal)
from .harness import ConfigError, ExperimentConfig, loglog_slope, run_experiment
from .instances import (ContextualSpec, HardInstanceSpec, alternative_theta, contextual_instance,
                        hard_instance, kl_between, subsample_hard_instance)
from .lasso import LassoFit, SparseLasso, fit_lasso, kkt_residual, lambda_schedule, support
from .policies import (ESTC, LinUCB, PhasedElimination, RestrictedPhaseElimination,
                       exploration_length, run_estc, run_linucb, run_phased_elimination,
                       run_restricted_pe, screening_length)

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "ContextSequence", "RegretTrajectory", "RngStream", "SparseInstance",
    "load_problem", "optimal_action", "sample_reward", "save_problem", "suboptimality_gap",
    "DesignCertificate", "DesignDistribution", "EOptimalDesign", "GOptimalDesign", "c_min",
    "solve_e_optimal", "solve_g_optimal",
    "ConfigError", "ExperimentConfig", "loglog_slope", "run_experiment",
    "ContextualSpec", "HardInstanceSpec", "alternative_theta", "contextual_instance",
    "hard_instance", "kl_between", "subsample_hard_instance",
    "LassoFit", "SparseLasso", "fit_lasso", "kkt_residual", "lambda_schedule", "support",
    "ESTC", "LinUCB", "PhasedElimination", "RestrictedPhaseElimination", "exploration_length",
    "run_estc", "run_linucb", "run_phased_elimination", "run_restricted_pe", "screening_length",
]
