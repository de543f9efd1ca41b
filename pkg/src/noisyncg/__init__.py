"""Linesearch Newton-CG methods for strongly convex minimization with
noisy function values and probabilistic derivative estimates, plus a
Monte-Carlo harness that measures hitting times against closed-form
expected-iteration bounds."""

from .cg import (CgBudgetError, CgError, CgResult, ForcingTerm,
                 NonFiniteOperatorError, SpectrumBounds, truncated_cg,
                 verify_step_constants)
from .finite_sum import (FiniteSumRunParams, GammaLoopError, gamma_loop,
                         gamma_loop_cost, run_finite_sum)
from .harness import (ExperimentConfig, ExperimentResult, HittingTimeStats,
                      build_problem, hitting_time, run_experiment,
                      z_trajectory)
from .oracles import (BoundedNoise, DynamicNoise, GradientEstimatorParams,
                      HessianEstimatorParams, SubsamplingParams,
                      estimate_gradient, estimate_hessian,
                      gradient_sample_size, hessian_sample_size,
                      noisy_f_bounded, noisy_f_dynamic, subsampled_gradient,
                      subsampled_hessian)
from .problems import (FiniteSumProblem, Problem, make_logistic,
                       make_quadratic, make_synthetic_logistic,
                       optimality_gap)
from .solvers import (IterationRecord, LinesearchParams, Trace,
                      accept_test_bounded, run_bounded, run_dynamic,
                      step_update)
from .theory import (LocalConvergenceParams, TheoryConstants, TheoryError,
                     epsilon_threshold, expected_bound_bounded,
                     expected_bound_dynamic, h_and_r,
                     local_contraction_factor, t_bar_bounded, t_bar_dynamic,
                     worst_case_constants)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
