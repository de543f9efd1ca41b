"""Linesearch Newton-CG drivers for the two noisy-function regimes.

Both drivers share one iteration engine: pick a forcing term, draw
gradient and Hessian estimates, take a truncated CG step, test a
(possibly relaxed) Armijo condition on noisy function values, then grow
or shrink the steplength.  They differ only in how f is corrupted and
how much slack the acceptance test grants:

* bounded regime: |f - ftilde| <= epsilon_f everywhere, acceptance test
  relaxed by + 2 epsilon_f;
* dynamic regime: per-evaluation error within -theta * t * s'g, plain
  Armijo test (theta = 0 means exact evaluations).

A run is strictly sequential; many runs may execute concurrently, each
owning its oracles and generator.  Traces carry ground-truth gaps so
hitting times and per-iteration inequality audits can be computed
afterwards.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import rng as rngmod
from . import theory
from .cg import CgError, ForcingTerm, truncated_cg
from .oracles import (BoundedNoise, GradientEstimatorParams,
                      HessianEstimatorParams, estimate_gradient,
                      estimate_hessian, noisy_f_bounded, noisy_f_dynamic)
from .problems import Problem, optimality_gap

STOP_HIT = "hit_epsilon"
STOP_MAX_ITERS = "max_iters"
STOP_FAILURE = "numerical_failure"

ETA_SCHEDULES = ("constant", "geometric", "grad_linked")

_ETA_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class LinesearchParams:
    """Outer-loop configuration shared by all variants.

    ``eta_schedule`` selects the forcing-term rule: ``"constant"`` is
    eta_bar / 2; ``"geometric"`` is min(eta_bar / 2, 0.5**k);
    ``"grad_linked"`` is min(eta_bar / 2, previous gradient-estimate
    norm).  A float fixes eta directly, a callable receives
    (k, previous gradient-estimate norm or None).  ``theta`` scales the
    dynamic-accuracy allowance and must stay below c / 2.
    """

    c: float = 0.1
    tau: float = 0.5
    t_max: float = 1.0
    t0: float = 1.0
    eta_bar: float = 0.5
    eta_schedule: Union[str, float, Callable] = "constant"
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if not 0.0 < self.t0 <= self.t_max:
            raise ValueError("t0 must lie in (0, t_max]")
        if not 0.0 < self.eta_bar < 1.0:
            raise ValueError("eta_bar must lie in (0, 1)")
        if self.theta < 0.0 or (self.theta > 0.0 and self.theta >= self.c / 2.0):
            raise ValueError("theta must satisfy 0 <= theta < c / 2")
        if (isinstance(self.eta_schedule, str)
                and self.eta_schedule not in ETA_SCHEDULES):
            raise ValueError(f"unknown eta schedule {self.eta_schedule!r}")

    def eta_value(self, k: int, prev_grad_est_norm) -> ForcingTerm:
        sched = self.eta_schedule
        half = 0.5 * self.eta_bar
        if callable(sched):
            eta = float(sched(k, prev_grad_est_norm))
        elif isinstance(sched, (int, float)):
            eta = float(sched)
        elif sched == "constant":
            eta = half
        elif sched == "geometric":
            eta = min(half, 0.5 ** k)
        else:  # grad_linked
            eta = half if prev_grad_est_norm is None else min(
                half, prev_grad_est_norm)
        return ForcingTerm(max(eta, _ETA_FLOOR), self.eta_bar)

    def schedule_label(self) -> Union[str, float]:
        if callable(self.eta_schedule):
            return "custom"
        return self.eta_schedule


def step_update(t_k: float, successful: bool, tau: float,
                t_max: float) -> float:
    """Grow the steplength after success (capped), shrink otherwise."""
    if not 0.0 < t_k <= t_max:
        raise ValueError(f"t_k={t_k} outside (0, {t_max}]")
    if successful:
        return min(t_max, t_k / tau)
    return tau * t_k


def accept_test_bounded(f_incumbent: float, f_trial: float, c: float,
                        t_k: float, s_k, g_k, epsilon_f: float) -> bool:
    """Armijo test relaxed by twice the function-noise bound.

    Equality counts as success.
    """
    sg = float(np.asarray(s_k) @ np.asarray(g_k))
    return f_trial <= f_incumbent + c * t_k * sg + 2.0 * epsilon_f


def gradient_stop_threshold(bounds, ls: LinesearchParams,
                            epsilon: float) -> float:
    """Gradient-norm surrogate for the gap test in deployment mode.

    On true iterations, an estimate norm at or below this value implies
    a ground-truth gap of at most epsilon.
    """
    return math.sqrt(2.0 * epsilon * bounds.lambda_1) / (
        1.0 + ls.t_max * ls.eta_bar)


@dataclass
class IterationRecord:
    """One outer iteration of any variant, with ground-truth diagnostics."""

    k: int
    t: float
    eta: float
    successful: bool
    true_iteration: bool
    hessian_true: bool
    cg_iters: int
    gap: float
    grad_norm_true: float
    z: float
    grad_est_norm: float
    step_norm: float
    step_dot_g: float
    curvature: float
    f_noisy_incumbent: float
    f_noisy_trial: float
    noise_allowance: float
    dist_to_min: Optional[float] = None
    grad_sample_size: Optional[int] = None
    hess_sample_size: Optional[int] = None
    gamma_loop_count: Optional[int] = None
    gamma_final: Optional[float] = None
    kappa_fg: Optional[float] = None
    kappa_fh: Optional[float] = None
    grad_component_evals: Optional[int] = None


@dataclass
class Trace:
    """Full record of one run.

    ``records[k].gap`` is the gap at the iterate before step k, so the
    gap sequence of length len(records) + 1 ends with ``final_gap``.
    The gap is constant across unsuccessful iterations.
    """

    variant: str
    seed: int
    params: dict
    records: list
    final_x: np.ndarray
    final_gap: float
    gap0: float
    stop_reason: str
    stop_detail: str = ""
    final_dist: Optional[float] = None
    iterates: Optional[list] = None

    def gap_sequence(self) -> np.ndarray:
        return np.array([r.gap for r in self.records] + [self.final_gap])

    def dist_sequence(self) -> Optional[np.ndarray]:
        if self.final_dist is None:
            return None
        return np.array([r.dist_to_min for r in self.records]
                        + [self.final_dist])

    @property
    def iterations(self) -> int:
        return len(self.records)


class _OracleSet:
    """Gradient/Hessian estimators plus a variant-specific f pair."""

    def __init__(self, problem, grad_params, hess_params):
        self.problem = problem
        self.grad_params = grad_params
        self.hess_params = hess_params

    def gradient(self, k, x, t, eta, run_rng):
        if self.grad_params is None:
            return self.problem.eval_grad(x), True
        stream = run_rng.stream(k, rngmod.GRADIENT)
        return estimate_gradient(self.problem, x, t, eta,
                                 self.grad_params, stream)

    def hessian(self, k, x, eta, run_rng):
        if self.hess_params is None:
            return (lambda v: self.problem.hess_apply(x, v)), True
        stream = run_rng.stream(k, rngmod.HESSIAN)
        return estimate_hessian(self.problem, x, eta,
                                self.hess_params, stream)

    def f_pair(self, k, x, trial, t, sg, run_rng):
        raise NotImplementedError


class _BoundedOracleSet(_OracleSet):
    def __init__(self, problem, noise, grad_params, hess_params):
        super().__init__(problem, grad_params, hess_params)
        self.noise = noise

    def f_pair(self, k, x, trial, t, sg, run_rng):
        f_inc = noisy_f_bounded(self.problem, x, self.noise,
                                run_rng.stream(k, rngmod.F_INCUMBENT),
                                at_trial=False)
        f_trial = noisy_f_bounded(self.problem, trial, self.noise,
                                  run_rng.stream(k, rngmod.F_TRIAL),
                                  at_trial=True)
        eps = self.noise.epsilon_f
        return f_inc, f_trial, eps, 2.0 * eps


class _DynamicOracleSet(_OracleSet):
    def __init__(self, problem, theta, grad_params, hess_params):
        super().__init__(problem, grad_params, hess_params)
        self.theta = theta

    def f_pair(self, k, x, trial, t, sg, run_rng):
        if self.theta == 0.0:
            return (float(self.problem.eval_f(x)),
                    float(self.problem.eval_f(trial)), 0.0, 0.0)
        allowance = -self.theta * t * sg
        f_inc = noisy_f_dynamic(self.problem, x, allowance,
                                run_rng.stream(k, rngmod.F_INCUMBENT))
        f_trial = noisy_f_dynamic(self.problem, trial, allowance,
                                  run_rng.stream(k, rngmod.F_TRIAL))
        return f_inc, f_trial, allowance, 0.0


def run_bounded(problem: Problem, noise: BoundedNoise,
                grad_params: Optional[GradientEstimatorParams],
                hess_params: Optional[HessianEstimatorParams],
                ls: LinesearchParams, epsilon: float,
                max_iters: Optional[int] = None, seed: int = 0,
                x0=None, stop_mode: str = "gap",
                record_iterates: bool = False) -> Trace:
    """Linesearch Newton-CG under bounded function noise.

    Successful trial points must pass the Armijo test relaxed by
    + 2 epsilon_f.  ``grad_params`` / ``hess_params`` of None mean
    exact derivative oracles.  Stops at the first ground-truth gap at
    or below epsilon (``stop_mode="gap"``) or at the gradient-norm
    surrogate (``stop_mode="grad_surrogate"``), else at ``max_iters``.
    """
    oracles = _BoundedOracleSet(problem, noise, grad_params, hess_params)
    echo = {
        "noise_law": noise.law,
        "epsilon_f": noise.epsilon_f,
        "grad": _grad_echo(grad_params),
        "hess": _hess_echo(hess_params),
    }
    delta_g = 0.0 if grad_params is None else grad_params.delta_g
    return _drive(problem, ls, epsilon, max_iters, seed, x0, oracles,
                  "bounded", stop_mode, echo, record_iterates,
                  eps_f=noise.epsilon_f, delta_g=delta_g)


def run_dynamic(problem: Problem, theta: float,
                grad_params: Optional[GradientEstimatorParams],
                hess_params: Optional[HessianEstimatorParams],
                ls: LinesearchParams, epsilon: float,
                max_iters: Optional[int] = None, seed: int = 0,
                x0=None, stop_mode: str = "gap",
                record_iterates: bool = False) -> Trace:
    """Linesearch Newton-CG with dynamically controlled function noise.

    Both function values of iteration k are evaluated to within
    -theta * t_k * s_k'g_k and tested with the plain Armijo condition.
    theta = 0 reduces to the classical inexact-Newton linesearch on
    exact values.
    """
    if theta != ls.theta:
        ls = LinesearchParams(c=ls.c, tau=ls.tau, t_max=ls.t_max, t0=ls.t0,
                              eta_bar=ls.eta_bar,
                              eta_schedule=ls.eta_schedule, theta=theta)
    oracles = _DynamicOracleSet(problem, theta, grad_params, hess_params)
    echo = {
        "theta": theta,
        "grad": _grad_echo(grad_params),
        "hess": _hess_echo(hess_params),
    }
    delta_g = 0.0 if grad_params is None else grad_params.delta_g
    return _drive(problem, ls, epsilon, max_iters, seed, x0, oracles,
                  "dynamic", stop_mode, echo, record_iterates,
                  theta=theta, delta_g=delta_g)


def _grad_echo(p):
    if p is None:
        return None
    return {"delta_g": p.delta_g, "failure_mode": p.failure_mode}


def _hess_echo(p):
    if p is None:
        return None
    return {"delta_h": p.delta_h, "C": p.accuracy_constant}


def _drive(problem, ls, epsilon, max_iters, seed, x0, oracles, variant,
           stop_mode, oracle_echo, record_iterates, eps_f=0.0, theta=0.0,
           delta_g=0.0):
    if stop_mode not in ("gap", "grad_surrogate"):
        raise ValueError(f"unknown stop mode {stop_mode!r}")
    n = problem.dimension
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    run_rng = rngmod.RunRng(seed)
    gap0 = optimality_gap(problem, x)
    if max_iters is None:
        max_iters = default_max_iters(variant, problem.bounds, ls, epsilon,
                                      gap0, eps_f=eps_f, theta=theta,
                                      delta_g=delta_g)
    surrogate = gradient_stop_threshold(problem.bounds, ls, epsilon)
    minimizer = problem.minimizer

    t = ls.t0
    prev_gn_est = None
    records = []
    iterates = [x.copy()] if record_iterates else None
    stop_reason, stop_detail = STOP_MAX_ITERS, ""

    for k in range(int(max_iters)):
        gap = optimality_gap(problem, x)
        if stop_mode == "gap" and gap <= epsilon:
            stop_reason = STOP_HIT
            break
        grad_true = problem.eval_grad(x)
        gn_true = float(np.linalg.norm(grad_true))

        forcing = ls.eta_value(k, prev_gn_est)
        eta = forcing.eta_k
        g, true_iter = oracles.gradient(k, x, t, eta, run_rng)
        gn_est = float(np.linalg.norm(g))
        prev_gn_est = gn_est
        if gn_est == 0.0:
            stop_reason, stop_detail = STOP_HIT, "stationary_estimate"
            break
        if stop_mode == "grad_surrogate" and gn_est <= surrogate:
            stop_reason, stop_detail = STOP_HIT, "gradient_surrogate"
            break

        hess_apply, hess_true = oracles.hessian(k, x, eta, run_rng)
        try:
            cg = truncated_cg(hess_apply, g, eta)
        except CgError as exc:
            stop_reason, stop_detail = STOP_FAILURE, str(exc)
            break
        s = cg.step
        sg = float(s @ g)
        trial = x + t * s
        f_inc, f_trial, allowance, slack = oracles.f_pair(
            k, x, trial, t, sg, run_rng)
        if not (math.isfinite(f_inc) and math.isfinite(f_trial)):
            stop_reason, stop_detail = STOP_FAILURE, "non-finite f value"
            break
        ok = f_trial <= f_inc + ls.c * t * sg + slack

        records.append(IterationRecord(
            k=k, t=t, eta=eta, successful=ok, true_iteration=true_iter,
            hessian_true=hess_true, cg_iters=cg.iterations, gap=gap,
            grad_norm_true=gn_true,
            z=math.log(gap0 / gap) if gap > 0.0 else math.inf,
            grad_est_norm=gn_est, step_norm=float(np.linalg.norm(s)),
            step_dot_g=sg, curvature=cg.curvature_product,
            f_noisy_incumbent=f_inc, f_noisy_trial=f_trial,
            noise_allowance=allowance,
            dist_to_min=None if minimizer is None else float(
                np.linalg.norm(x - minimizer)),
        ))
        if ok:
            x = trial
        t = step_update(t, ok, ls.tau, ls.t_max)
        if record_iterates:
            iterates.append(x.copy())

    params = {
        "variant": variant,
        "problem": problem.name,
        "dimension": n,
        "bounds": [problem.bounds.lambda_1, problem.bounds.lambda_n],
        "ls": {
            "c": ls.c, "tau": ls.tau, "t_max": ls.t_max, "t0": ls.t0,
            "eta_bar": ls.eta_bar, "eta_schedule": ls.schedule_label(),
            "theta": ls.theta,
        },
        "epsilon": epsilon,
        "max_iters": int(max_iters),
        "stop_mode": stop_mode,
        "seed": int(seed),
        "oracles": oracle_echo,
        "theory": theory.summary(variant, problem.bounds, ls,
                                 eps_f=eps_f, theta=theta, epsilon=epsilon),
    }
    return Trace(
        variant=variant, seed=int(seed), params=params, records=records,
        final_x=x, final_gap=optimality_gap(problem, x), gap0=gap0,
        stop_reason=stop_reason, stop_detail=stop_detail,
        final_dist=None if minimizer is None else float(
            np.linalg.norm(x - minimizer)),
        iterates=iterates,
    )


def default_max_iters(variant, bounds, ls, epsilon, gap0, eps_f=0.0,
                      theta=0.0, delta_g=0.0) -> int:
    """Ten times the expected-iteration bound when computable, else 1e4.

    The bounded-regime bound needs an admissible progress/noise ratio;
    when none exists for this configuration the fallback applies.
    """
    fallback = 10_000
    if epsilon <= 0.0 or gap0 <= epsilon:
        return fallback
    z_eps = math.log(gap0 / epsilon)
    try:
        if variant == "bounded":
            t_bar = theory.t_bar_bounded(ls.c, ls.eta_bar, bounds)
            m = theory.m_constant_bounded(ls.c, ls.eta_bar, bounds, ls.t_max)
            ratio = theory.gamma_ratio_bounded(eps_f, epsilon, ls.c,
                                               ls.eta_bar, bounds, ls.t_max)
            gamma = max(ratio, 1e-9)
            bound = theory.expected_bound_bounded(delta_g, gamma, m, z_eps,
                                                  ls.tau, t_bar, ls.t0)
        else:
            t_bar = theory.t_bar_dynamic(ls.c, theta, ls.eta_bar, bounds)
            m = theory.m_constant_dynamic(ls.c, theta, ls.eta_bar, bounds,
                                          ls.t_max)
            bound = theory.expected_bound_dynamic(delta_g, m, z_eps, ls.tau,
                                                  t_bar, ls.t0)
        return max(1, math.ceil(10.0 * bound))
    except theory.TheoryError:
        return fallback
