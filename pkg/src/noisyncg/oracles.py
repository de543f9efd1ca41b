"""Noisy function values and probabilistic derivative estimators.

Three ingredients, each built so its defining inequality can be audited
with ground truth available:

* bounded and dynamically controlled additive noise on f, with the
  emitted value nudged so the certified bound holds for the floats the
  caller will actually compare;
* gradient and Hessian estimators that are accurate with a prescribed
  probability, whose truth indicators are re-derived from the defining
  accuracy inequality rather than assumed from the branch taken;
* uniform-subsampling estimators for finite sums with Bernstein-style
  sample sizes.

An oracle instance is confined to one solver run; distinct runs with
distinct seeds may execute concurrently.
"""

import math
from dataclasses import dataclass

import numpy as np

from .problems import FiniteSumProblem, Problem

NOISE_LAWS = ("uniform", "adversarial_sign", "constant")
GRADIENT_FAILURE_MODES = ("scaled_opposite", "random_large")


@dataclass(frozen=True)
class BoundedNoise:
    """Additive noise on f with |error| <= epsilon_f everywhere.

    Laws: ``uniform`` draws in [-eps_f, eps_f]; ``adversarial_sign``
    adds +eps_f at trial points and -eps_f at incumbents, the worst
    case for an Armijo test relaxed by 2 eps_f; ``constant`` always
    adds +eps_f.
    """

    epsilon_f: float
    law: str = "uniform"

    def __post_init__(self):
        if self.epsilon_f < 0.0:
            raise ValueError("epsilon_f must be nonnegative")
        if self.law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.law!r}")


@dataclass(frozen=True)
class DynamicNoise:
    """Controllable noise scaled by the step's predicted decrease.

    The per-evaluation error allowance is -theta * t_k * s_k'g_k, which
    is positive along any CG descent step.
    """

    theta: float

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")


@dataclass(frozen=True)
class GradientEstimatorParams:
    """Gradient estimate accurate with probability >= 1 - delta_g.

    The accurate branch adds a uniformly random direction scaled to
    alpha * ||grad|| with alpha = t*eta / (1 + t*eta), which guarantees
    ||g - grad|| <= t * eta * ||g||.  Failure modes: ``scaled_opposite``
    returns -grad, ``random_large`` adds a perturbation of norm
    3 (1 + t*eta) ||grad||.
    """

    delta_g: float
    failure_mode: str = "scaled_opposite"

    def __post_init__(self):
        if not 0.0 <= self.delta_g <= 1.0:
            raise ValueError("delta_g must lie in [0, 1]")
        if self.failure_mode not in GRADIENT_FAILURE_MODES:
            raise ValueError(f"unknown failure mode {self.failure_mode!r}")


@dataclass(frozen=True)
class HessianEstimatorParams:
    """Hessian estimate accurate (within C * eta_k) w.p. >= 1 - delta_H.

    Either branch eigen-clips the perturbed matrix into the certified
    spectrum interval, so the returned operator is symmetric positive
    definite with spectrum in [lambda_1, lambda_n] unconditionally.
    """

    delta_h: float
    accuracy_constant: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta_h <= 1.0:
            raise ValueError("delta_h must lie in [0, 1]")
        if self.accuracy_constant < 0.0:
            raise ValueError("accuracy constant must be nonnegative")


@dataclass(frozen=True)
class SubsamplingParams:
    """Finite-sum estimator configuration.

    The gradient accuracy proxy follows the schedule
    gamma_k^(i) = kappa_gamma**i * gamma_0, strictly decreasing in i.
    """

    kappa_gamma: float
    gamma_0: float
    delta_g: float
    delta_h: float
    accuracy_constant: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.kappa_gamma < 1.0:
            raise ValueError("kappa_gamma must lie in (0, 1)")
        if self.gamma_0 <= 0.0:
            raise ValueError("gamma_0 must be positive")
        for name in ("delta_g", "delta_h"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


def _emit_within(f_value: float, error: float, bound: float) -> float:
    """Return f + error nudged so |emitted - f| <= bound holds in floats.

    Adding a small error to a large f can round past the certified
    bound by an ulp; shrink toward f until the float re-check passes.
    """
    if bound == 0.0:
        return f_value
    out = f_value + error
    for _ in range(3):
        if abs(out - f_value) <= bound:
            return out
        error *= 0.5
        out = f_value + error
    return f_value


def noisy_f_bounded(problem: Problem, x, noise: BoundedNoise, rng,
                    at_trial: bool = False) -> float:
    """Evaluate f(x) plus bounded noise per the configured law."""
    f = float(problem.eval_f(np.asarray(x, dtype=float)))
    eps = noise.epsilon_f
    if eps == 0.0:
        return f
    if noise.law == "uniform":
        e = eps * (2.0 * rng.random() - 1.0)
    elif noise.law == "adversarial_sign":
        e = eps if at_trial else -eps
    else:
        e = eps
    return _emit_within(f, e, eps)


def noisy_f_dynamic(problem: Problem, x, allowance: float, rng) -> float:
    """Evaluate f(x) plus noise within the dynamic allowance.

    The caller computes allowance = -theta * t_k * s_k'g_k; a
    nonpositive allowance means a non-descent step reached the oracle,
    which is a solver bug.
    """
    if allowance <= 0.0:
        raise ValueError(f"dynamic noise allowance must be positive, "
                         f"got {allowance}")
    f = float(problem.eval_f(np.asarray(x, dtype=float)))
    e = allowance * (2.0 * rng.random() - 1.0)
    return _emit_within(f, e, allowance)


def _random_unit(rng, n):
    while True:
        u = rng.standard_normal(n)
        norm = np.linalg.norm(u)
        if norm > 0.0:
            return u / norm


def estimate_gradient(problem: Problem, x, t_k: float, eta_k: float,
                      params: GradientEstimatorParams, rng):
    """Draw a gradient estimate; returns (g, accurate_indicator).

    The indicator is 1 exactly when ||g - grad f(x)|| <= t*eta*||g||
    holds for the returned floats (ties count), independent of which
    branch produced g.
    """
    x = np.asarray(x, dtype=float)
    grad = problem.eval_grad(x)
    gn = float(np.linalg.norm(grad))
    te = t_k * eta_k
    accurate = rng.random() < 1.0 - params.delta_g
    if gn == 0.0:
        return grad.copy(), True
    if accurate:
        alpha = te / (1.0 + te)
        g = grad + (alpha * gn) * _random_unit(rng, x.size)
    elif params.failure_mode == "scaled_opposite":
        g = -grad
    else:
        g = grad + (3.0 * (1.0 + te) * gn) * _random_unit(rng, x.size)
    indicator = float(np.linalg.norm(g - grad)) <= te * float(np.linalg.norm(g))
    if accurate and not indicator:
        # Rounding flipped a boundary case; fall back to the exact
        # gradient so the accuracy probability floor stays intact.
        g, indicator = grad.copy(), True
    return g, indicator


def _spectral_norm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def _clip_spectrum(m, lo, hi):
    w, v = np.linalg.eigh(m)
    h = (v * np.clip(w, lo, hi)) @ v.T
    return 0.5 * (h + h.T)


def estimate_hessian(problem: Problem, x, eta_k: float,
                     params: HessianEstimatorParams, rng):
    """Draw a Hessian estimate; returns (apply, accurate_indicator).

    The estimate is the true Hessian plus a random symmetric
    perturbation (spectral norm C*eta in the accurate branch, 3x that
    otherwise), eigen-clipped into the certified spectrum interval.
    The true Hessian's spectrum already lies inside the interval, so
    clipping shrinks the Frobenius distance to it; the indicator is
    always re-derived from ||H - hess|| <= C*eta in spectral norm after
    clipping, never assumed from the branch taken.  If a boundary case
    ever fails that re-check in the accurate branch, the exact Hessian
    is substituted to keep the probability floor intact.
    """
    x = np.asarray(x, dtype=float)
    a = problem.hess_dense(x)
    lo, hi = problem.bounds.lambda_1, problem.bounds.lambda_n
    target = params.accuracy_constant * eta_k
    accurate = rng.random() < 1.0 - params.delta_h

    if accurate and target == 0.0:
        h = a
    else:
        b = rng.standard_normal(a.shape)
        e = 0.5 * (b + b.T)
        norm = _spectral_norm(e)
        scale = target if accurate else 3.0 * target
        if norm > 0.0:
            e *= scale / norm
        h = _clip_spectrum(a + e, lo, hi)

    indicator = _spectral_norm(h - a) <= target
    if accurate and not indicator:
        h, indicator = a, True

    return (lambda v: h @ v), indicator


def gradient_sample_size(kappa_fg: float, gamma_gk: float, delta_g: float,
                         n: int, n_components: int) -> int:
    """Bernstein-style subsample size for a gradient accuracy gamma_gk.

    min(N, ceil(4 k/g (k/g + 1/3) log((n+1)/delta_g))), floored at 1.
    """
    if kappa_fg <= 0.0 or gamma_gk <= 0.0 or not 0.0 < delta_g < 1.0:
        raise ValueError("kappa, gamma must be positive, delta in (0, 1)")
    ratio = kappa_fg / gamma_gk
    bound = 4.0 * ratio * (ratio + 1.0 / 3.0) * math.log((n + 1) / delta_g)
    return int(max(1, min(n_components, math.ceil(bound))))


def hessian_sample_size(kappa_fh: float, accuracy_constant: float,
                        eta_k: float, delta_h: float, n: int,
                        n_components: int) -> int:
    """Bernstein-style subsample size for Hessian accuracy C * eta_k."""
    acc = accuracy_constant * eta_k
    if kappa_fh <= 0.0 or acc <= 0.0 or not 0.0 < delta_h < 1.0:
        raise ValueError("kappa, C*eta must be positive, delta in (0, 1)")
    ratio = kappa_fh / acc
    bound = 4.0 * ratio * (ratio + 1.0 / 3.0) * math.log(2 * n / delta_h)
    return int(max(1, min(n_components, math.ceil(bound))))


def _draw_indices(rng, n_components: int, sample_size: int) -> np.ndarray:
    if not 1 <= sample_size <= n_components:
        raise ValueError(
            f"sample size {sample_size} outside [1, {n_components}]")
    idx = rng.choice(n_components, size=sample_size, replace=False)
    # Sorted so a full sample reproduces the exact mean bit for bit.
    return np.sort(idx)


def subsampled_gradient(fsp: FiniteSumProblem, x, sample_size: int,
                        rng) -> np.ndarray:
    """Mean gradient over a uniform without-replacement index sample."""
    idx = _draw_indices(rng, fsp.n_components, sample_size)
    return fsp.subset_grad(idx, np.asarray(x, dtype=float))


class SubsampledHessianOperator:
    """Callable v -> mean Hessian-vector product over a drawn subset.

    Keeps the drawn index set so diagnostics can reconstruct the dense
    subsampled matrix.
    """

    def __init__(self, fsp: FiniteSumProblem, x, indices):
        self._fsp = fsp
        self._x = np.asarray(x, dtype=float)
        self.indices = indices

    def __call__(self, v):
        return self._fsp.subset_hess_apply(self.indices, self._x, v)

    def dense(self):
        return self._fsp.subset_hess_dense(self.indices, self._x)


def subsampled_hessian(fsp: FiniteSumProblem, x, sample_size: int,
                       rng) -> SubsampledHessianOperator:
    """Mean Hessian operator over a uniform without-replacement sample."""
    idx = _draw_indices(rng, fsp.n_components, sample_size)
    return SubsampledHessianOperator(fsp, x, idx)
