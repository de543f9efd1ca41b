"""Monte-Carlo experiment orchestration.

An experiment is a batch of independent seeded runs of one solver
configuration.  Each replication uses seed = base_seed + i, so a batch
is exactly reproducible and replications may execute concurrently.  The
harness extracts hitting times, censors runs that exhaust their budget
(censored runs are counted, never silently dropped), attaches the
matching expected-iteration bound, and runs the per-iteration audits
over every trace.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import theory
from .audits import audit_trace
from .finite_sum import FiniteSumRunParams, run_finite_sum
from .oracles import (BoundedNoise, GradientEstimatorParams,
                      HessianEstimatorParams, SubsamplingParams)
from .problems import (FiniteSumProblem, Problem, load_dataset_binary,
                       load_dataset_text, make_quadratic,
                       make_synthetic_logistic, optimality_gap)
from .solvers import LinesearchParams, Trace, run_bounded, run_dynamic

VARIANTS = ("bounded", "dynamic", "finite_sum")

CENSORED = None  # marker in hitting-time sample lists


def hitting_time(trace: Trace, epsilon: float):
    """First iteration index whose ground-truth gap is <= epsilon.

    Index counts iterations performed before the hit; the final iterate
    participates, so a run of K iterations can hit at K.  Returns None
    (censored) when the trace never reaches epsilon.
    """
    gaps = trace.gap_sequence()
    below = np.nonzero(gaps <= epsilon)[0]
    return int(below[0]) if below.size else CENSORED


def z_trajectory(trace: Trace) -> np.ndarray:
    """Progress measure log(gap0 / gap_k) along the trace."""
    gaps = trace.gap_sequence()
    with np.errstate(divide="ignore"):
        return np.log(trace.gap0 / gaps)


@dataclass
class HittingTimeStats:
    """Aggregated hitting times of one batch."""

    samples: list
    mean: float
    std: float
    censored_count: int
    theoretical_bound: float

    @property
    def n_runs(self) -> int:
        return len(self.samples)

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / max(1, len(self.samples))

    @property
    def margin(self) -> float:
        """Bound minus empirical mean (positive means the bound held)."""
        return self.theoretical_bound - self.mean

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "mean": self.mean,
            "std": self.std,
            "censored_count": self.censored_count,
            "censored_fraction": self.censored_fraction,
            "theoretical_bound": self.theoretical_bound,
        }

    @classmethod
    def from_samples(cls, samples, bound: float) -> "HittingTimeStats":
        hit = [s for s in samples if s is not CENSORED]
        mean = float(np.mean(hit)) if hit else math.nan
        std = float(np.std(hit, ddof=1)) if len(hit) > 1 else 0.0
        return cls(samples=list(samples), mean=mean, std=std,
                   censored_count=len(samples) - len(hit),
                   theoretical_bound=bound)


def build_problem(spec: dict):
    """Construct a problem from its config-file description.

    Kinds: ``quadratic`` (dim, spectrum as a list or
    {min, max, spacing: linear|log}, shift, rotation seed),
    ``logistic_synthetic`` (n_samples, dim, ridge, data_seed,
    unit_rows) and ``logistic_file`` (path, format: text|binary,
    ridge).
    """
    kind = spec.get("kind")
    if kind == "quadratic":
        dim = int(spec["dim"])
        spectrum = spec.get("spectrum", {"min": 1.0, "max": 4.0})
        if isinstance(spectrum, dict):
            lo, hi = float(spectrum["min"]), float(spectrum["max"])
            if spectrum.get("spacing", "linear") == "log":
                eigs = np.geomspace(lo, hi, dim)
            else:
                eigs = np.linspace(lo, hi, dim)
        else:
            eigs = np.asarray(spectrum, dtype=float)
        return make_quadratic(dim, eigs, shift=spec.get("shift"),
                              seed=spec.get("seed"))
    if kind == "logistic_synthetic":
        fsp, _, _ = make_synthetic_logistic(
            int(spec["n_samples"]), int(spec["dim"]), float(spec["ridge"]),
            int(spec.get("data_seed", 0)),
            unit_rows=bool(spec.get("unit_rows", True)))
        return fsp
    if kind == "logistic_file":
        loader = (load_dataset_binary if spec.get("format") == "binary"
                  else load_dataset_text)
        features, labels = loader(spec["path"])
        from .problems import make_logistic
        return make_logistic(features, labels, float(spec["ridge"]))
    raise ValueError(f"unknown problem kind {kind!r}")


@dataclass
class ExperimentConfig:
    """One batch: a problem, a solver variant and its oracle setup."""

    problem: Union[dict, Problem, FiniteSumProblem]
    variant: str
    ls: LinesearchParams
    epsilon: float
    max_iters: int
    replications: int = 1
    base_seed: int = 0
    x0: Optional[list] = None
    stop_mode: str = "gap"
    noise: Optional[BoundedNoise] = None
    grad_params: Optional[GradientEstimatorParams] = None
    hess_params: Optional[HessianEstimatorParams] = None
    sub: Optional[SubsamplingParams] = None
    max_gamma_loops: int = 60
    force_full_sample: bool = False
    gamma: Optional[float] = None
    workers: int = 1
    record_iterates: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.variant == "bounded" and self.noise is None:
            raise ValueError("bounded variant needs a BoundedNoise")
        if self.variant == "finite_sum" and self.sub is None:
            raise ValueError("finite_sum variant needs SubsamplingParams")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    stats: HittingTimeStats
    traces: list
    failures: list          # (replication index, error message)
    audit_violations: list  # strings, prefixed by replication index
    theory_constants: dict


def _resolve_problem(config: ExperimentConfig):
    prob = config.problem
    if isinstance(prob, dict):
        prob = build_problem(prob)
    if isinstance(prob, FiniteSumProblem):
        return prob, prob.base
    return prob, prob


def _single_run(config: ExperimentConfig, fsp, base: Problem,
                seed: int) -> Trace:
    if config.variant == "bounded":
        return run_bounded(base, config.noise, config.grad_params,
                           config.hess_params, config.ls, config.epsilon,
                           config.max_iters, seed=seed, x0=config.x0,
                           stop_mode=config.stop_mode,
                           record_iterates=config.record_iterates)
    if config.variant == "dynamic":
        return run_dynamic(base, config.ls.theta, config.grad_params,
                           config.hess_params, config.ls, config.epsilon,
                           config.max_iters, seed=seed, x0=config.x0,
                           stop_mode=config.stop_mode,
                           record_iterates=config.record_iterates)
    if not isinstance(fsp, FiniteSumProblem):
        raise ValueError("finite_sum variant needs a FiniteSumProblem")
    params = FiniteSumRunParams(
        ls=config.ls, sub=config.sub, epsilon=config.epsilon,
        max_iters=config.max_iters,
        max_gamma_loops=config.max_gamma_loops,
        force_full_sample=config.force_full_sample)
    return run_finite_sum(fsp, params, seed=seed, x0=config.x0,
                          stop_mode=config.stop_mode,
                          record_iterates=config.record_iterates)


def _theory_for(config: ExperimentConfig, base: Problem,
                gap0: float) -> dict:
    delta_g = 0.0
    if config.variant == "finite_sum":
        delta_g = config.sub.delta_g
    elif config.grad_params is not None:
        delta_g = config.grad_params.delta_g
    eps_f = config.noise.epsilon_f if config.noise is not None else 0.0
    z_eps = (math.log(gap0 / config.epsilon)
             if 0.0 < config.epsilon < gap0 else math.nan)
    try:
        tc = theory.constants_for(
            config.variant, base.bounds, config.ls, epsilon=config.epsilon,
            eps_f=eps_f, theta=config.ls.theta, delta_g=delta_g,
            gamma=config.gamma, z_eps=z_eps)
        return tc.as_dict()
    except theory.TheoryError as exc:
        return {"variant": config.variant, "error": str(exc)}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the batch, aggregate hitting times, audit every trace."""
    fsp, base = _resolve_problem(config)
    x0 = np.zeros(base.dimension) if config.x0 is None else np.asarray(
        config.x0, dtype=float)
    gap0 = optimality_gap(base, x0)
    constants = _theory_for(config, base, gap0)

    if (config.variant == "bounded" and config.noise.epsilon_f > 0.0
            and config.gamma is not None):
        thr = constants.get("epsilon_threshold", math.nan)
        if math.isfinite(thr) and config.epsilon <= thr:
            warnings.warn(
                f"epsilon={config.epsilon} is at or below the admissible "
                f"threshold {thr}; the expected-iteration bound does not "
                f"apply", stacklevel=2)

    seeds = [config.base_seed + i for i in range(config.replications)]

    def one(seed):
        try:
            return seed, _single_run(config, fsp, base, seed), None
        except Exception as exc:  # recorded per replication, not fatal
            return seed, None, f"seed {seed}: {exc}"

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(one, seeds))
    else:
        outputs = [one(s) for s in seeds]
    outputs.sort(key=lambda item: item[0])  # order-independent aggregation

    traces, failures, violations, samples = [], [], [], []
    for seed, trace, error in outputs:
        if trace is None:
            failures.append((seed, error))
            continue
        traces.append(trace)
        samples.append(hitting_time(trace, config.epsilon))
        for line in audit_trace(trace):
            violations.append(f"seed {seed}: {line}")

    bound = constants.get("expected_bound", math.nan)
    stats = HittingTimeStats.from_samples(samples, bound)
    return ExperimentResult(config=config, stats=stats, traces=traces,
                            failures=failures, audit_violations=violations,
                            theory_constants=constants)


def empirical_step_ratios(trace: Trace) -> dict:
    """Per-run empirical counterparts of the worst-case step constants.

    Diagnostics only; the theory formulas always use the worst-case
    values.
    """
    if not trace.records:
        return {"kappa1_hat": math.nan, "kappa2_hat": math.nan,
                "beta_hat": math.nan}
    ratios = np.array([[r.step_norm / r.grad_est_norm,
                        -r.step_dot_g / r.step_norm ** 2]
                       for r in trace.records if r.grad_est_norm > 0
                       and r.step_norm > 0])
    return {
        "kappa1_hat": float(ratios[:, 0].min()),
        "kappa2_hat": float(ratios[:, 0].max()),
        "beta_hat": float(ratios[:, 1].min()),
    }
