"""Linesearch Newton-CG for finite sums with subsampled derivatives.

The objective itself is evaluated exactly (full sum); the gradient and
Hessian come from uniform subsamples sized by Bernstein-style bounds.
Because the gradient accuracy target t * eta * ||g|| depends on the
estimate it controls, the gradient is drawn inside a shrinking-target
loop: start from gamma_0, size the sample for the current target, draw,
and accept once the target is at or below t * eta * ||g||, otherwise
shrink the target by kappa_gamma and redraw fresh.

When every component shares the certified curvature interval, any
subsampled Hessian lies in it as well, so the CG step keeps its
worst-case quality constants without clipping.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from . import theory
from .cg import CgError, truncated_cg
from .oracles import (SubsamplingParams, gradient_sample_size,
                      hessian_sample_size, subsampled_gradient,
                      subsampled_hessian)
from .problems import FiniteSumProblem, optimality_gap
from .solvers import (STOP_FAILURE, STOP_HIT, STOP_MAX_ITERS,
                      IterationRecord, LinesearchParams, Trace,
                      gradient_stop_threshold, step_update)

DEFAULT_MAX_GAMMA_LOOPS = 60


class GammaLoopError(RuntimeError):
    """Gradient accuracy loop exhausted its budget.

    Signals that t * eta * ||g|| is too small relative to the sampling
    variance, which normally only happens at stationarity where the
    outer stop fires first.
    """


@dataclass(frozen=True)
class FiniteSumRunParams:
    """Configuration of one subsampled run."""

    ls: LinesearchParams
    sub: SubsamplingParams
    epsilon: float
    max_iters: int
    max_gamma_loops: int = DEFAULT_MAX_GAMMA_LOOPS
    force_full_sample: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or self.max_gamma_loops < 1:
            raise ValueError("iteration budgets must be positive")


def gamma_loop(fsp: FiniteSumProblem, x, t_k: float, eta_k: float,
               sub: SubsamplingParams, rng,
               max_loops: int = DEFAULT_MAX_GAMMA_LOOPS,
               force_full: bool = False):
    """Draw a subsampled gradient meeting its implicit accuracy target.

    Returns (g, gamma_final, loops, sample_size) with
    gamma_final <= t_k * eta_k * ||g|| and loops the number of draws
    taken.  Each pass redraws the index set fresh.
    """
    if t_k * eta_k <= 0.0:
        raise ValueError("t_k * eta_k must be positive")
    n = fsp.dimension
    big_n = fsp.n_components
    kappa = fsp.kappa_grad(x)
    gamma = sub.gamma_0
    for i in range(int(max_loops)):
        size = big_n if force_full else gradient_sample_size(
            kappa, gamma, sub.delta_g, n, big_n)
        g = subsampled_gradient(fsp, x, size, rng)
        if gamma <= t_k * eta_k * float(np.linalg.norm(g)):
            return g, gamma, i + 1, size
        gamma = sub.kappa_gamma * gamma
    raise GammaLoopError(
        f"gradient accuracy loop exceeded {max_loops} passes "
        f"(last gamma {gamma:.3e})")


def gamma_loop_cost(kappa_fg: float, sub: SubsamplingParams, loops: int,
                    n: int, n_components: int,
                    force_full: bool = False) -> int:
    """Component-gradient evaluations one accuracy loop consumed.

    The per-pass sizes are deterministic in the shrinking target, so
    the effort is exactly reconstructible from the recorded loop count.
    """
    if force_full:
        return loops * n_components
    gamma = sub.gamma_0
    total = 0
    for _ in range(loops):
        total += gradient_sample_size(kappa_fg, gamma, sub.delta_g, n,
                                      n_components)
        gamma = sub.kappa_gamma * gamma
    return total


def run_finite_sum(fsp: FiniteSumProblem, params: FiniteSumRunParams,
                   seed: int = 0, x0=None, stop_mode: str = "gap",
                   record_iterates: bool = False) -> Trace:
    """Subsampled Newton-CG on a finite sum with an exact-f linesearch.

    With ``force_full_sample`` both estimators use all components, so
    the iterate sequence coincides with the dynamic driver at theta = 0
    and exact oracles.  Truth indicators for the trace are re-derived
    against the exact gradient and Hessian (testing diagnostics).
    """
    if stop_mode not in ("gap", "grad_surrogate"):
        raise ValueError(f"unknown stop mode {stop_mode!r}")
    ls, sub = params.ls, params.sub
    problem = fsp.base
    n = problem.dimension
    big_n = fsp.n_components
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    run_rng = rngmod.RunRng(seed)
    gap0 = optimality_gap(problem, x)
    surrogate = gradient_stop_threshold(problem.bounds, ls, params.epsilon)
    minimizer = problem.minimizer

    t = ls.t0
    prev_gn_est = None
    records = []
    iterates = [x.copy()] if record_iterates else None
    stop_reason, stop_detail = STOP_MAX_ITERS, ""

    for k in range(params.max_iters):
        gap = optimality_gap(problem, x)
        if stop_mode == "gap" and gap <= params.epsilon:
            stop_reason = STOP_HIT
            break
        grad_true = problem.eval_grad(x)
        gn_true = float(np.linalg.norm(grad_true))

        eta = ls.eta_value(k, prev_gn_est).eta_k
        try:
            g, gamma_final, loops, n_g = gamma_loop(
                fsp, x, t, eta, sub, run_rng.stream(k, rngmod.SUBSAMPLE_GRADIENT),
                max_loops=params.max_gamma_loops,
                force_full=params.force_full_sample)
        except GammaLoopError as exc:
            stop_reason, stop_detail = STOP_FAILURE, str(exc)
            break
        gn_est = float(np.linalg.norm(g))
        prev_gn_est = gn_est
        if gn_est == 0.0:
            stop_reason, stop_detail = STOP_HIT, "stationary_estimate"
            break
        if stop_mode == "grad_surrogate" and gn_est <= surrogate:
            stop_reason, stop_detail = STOP_HIT, "gradient_surrogate"
            break
        true_iter = (float(np.linalg.norm(g - grad_true))
                     <= t * eta * gn_est)

        kappa_h = fsp.kappa_hess(x)
        n_h = big_n if params.force_full_sample else hessian_sample_size(
            kappa_h, sub.accuracy_constant, eta, sub.delta_h, n, big_n)
        hess_op = subsampled_hessian(
            fsp, x, n_h, run_rng.stream(k, rngmod.SUBSAMPLE_HESSIAN))
        hess_err = float(np.max(np.abs(np.linalg.eigvalsh(
            hess_op.dense() - problem.hess_dense(x)))))
        hess_true = hess_err <= sub.accuracy_constant * eta

        try:
            cg = truncated_cg(hess_op, g, eta)
        except CgError as exc:
            stop_reason, stop_detail = STOP_FAILURE, str(exc)
            break
        s = cg.step
        sg = float(s @ g)
        trial = x + t * s
        f_inc = float(problem.eval_f(x))
        f_trial = float(problem.eval_f(trial))
        if not (math.isfinite(f_inc) and math.isfinite(f_trial)):
            stop_reason, stop_detail = STOP_FAILURE, "non-finite f value"
            break
        ok = f_trial <= f_inc + ls.c * t * sg

        kappa_g = fsp.kappa_grad(x)
        records.append(IterationRecord(
            k=k, t=t, eta=eta, successful=ok, true_iteration=true_iter,
            hessian_true=hess_true, cg_iters=cg.iterations, gap=gap,
            grad_norm_true=gn_true,
            z=math.log(gap0 / gap) if gap > 0.0 else math.inf,
            grad_est_norm=gn_est, step_norm=float(np.linalg.norm(s)),
            step_dot_g=sg, curvature=cg.curvature_product,
            f_noisy_incumbent=f_inc, f_noisy_trial=f_trial,
            noise_allowance=0.0,
            dist_to_min=None if minimizer is None else float(
                np.linalg.norm(x - minimizer)),
            grad_sample_size=n_g, hess_sample_size=n_h,
            gamma_loop_count=loops, gamma_final=gamma_final,
            kappa_fg=kappa_g, kappa_fh=kappa_h,
            grad_component_evals=gamma_loop_cost(
                kappa_g, sub, loops, n, big_n,
                force_full=params.force_full_sample),
        ))
        if ok:
            x = trial
        t = step_update(t, ok, ls.tau, ls.t_max)
        if record_iterates:
            iterates.append(x.copy())

    run_params = {
        "variant": "finite_sum",
        "problem": problem.name,
        "dimension": n,
        "n_components": big_n,
        "bounds": [problem.bounds.lambda_1, problem.bounds.lambda_n],
        "ls": {
            "c": ls.c, "tau": ls.tau, "t_max": ls.t_max, "t0": ls.t0,
            "eta_bar": ls.eta_bar, "eta_schedule": ls.schedule_label(),
            "theta": ls.theta,
        },
        "epsilon": params.epsilon,
        "max_iters": params.max_iters,
        "stop_mode": stop_mode,
        "seed": int(seed),
        "oracles": {
            "sub": {
                "kappa_gamma": sub.kappa_gamma, "gamma_0": sub.gamma_0,
                "delta_g": sub.delta_g, "delta_h": sub.delta_h,
                "C": sub.accuracy_constant,
            },
            "max_gamma_loops": params.max_gamma_loops,
            "force_full_sample": params.force_full_sample,
        },
        "theory": theory.summary("finite_sum", problem.bounds, ls,
                                 epsilon=params.epsilon),
    }
    return Trace(
        variant="finite_sum", seed=int(seed), params=run_params,
        records=records, final_x=x, final_gap=optimality_gap(problem, x),
        gap0=gap0, stop_reason=stop_reason, stop_detail=stop_detail,
        final_dist=None if minimizer is None else float(
            np.linalg.norm(x - minimizer)),
        iterates=iterates,
    )
