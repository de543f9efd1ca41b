"""Closed-form constants and expected-iteration bounds.

Everything here is a pure function of the configuration: worst-case
step-quality constants from the certified spectrum interval, the
steplength threshold below which a true iteration must be accepted, the
per-iteration progress function h and noise penalty r, the smallest
admissible accuracy target under bounded noise, the expected hitting
time bounds for both noisy regimes, and the local contraction factor of
full Newton-CG steps near the minimizer.

Worst-case constants (kappa_1 = (1 - eta_bar) / lambda_n,
kappa_2 = 1 / lambda_1, beta = lambda_1) are used throughout; empirical
per-step ratios recorded in traces are diagnostics only and never feed
these formulas.
"""

import math
from dataclasses import dataclass

from .cg import SpectrumBounds


class TheoryError(ValueError):
    """A formula's admissibility condition is violated."""


def worst_case_constants(bounds: SpectrumBounds, eta_bar: float):
    """Return (kappa1, kappa2, beta) for zero-initialized truncated CG."""
    if not 0.0 < eta_bar < 1.0:
        raise TheoryError("eta_bar must lie in (0, 1)")
    kappa1 = (1.0 - eta_bar) / bounds.lambda_n
    kappa2 = 1.0 / bounds.lambda_1
    beta = bounds.lambda_1
    return kappa1, kappa2, beta


def t_bar_bounded(c: float, eta_bar: float, bounds: SpectrumBounds) -> float:
    """Steplength below which true iterations are accepted (bounded noise).

    2 beta kappa1 (1 - c) / (kappa1 lambda_n + 2).
    """
    if not 0.0 < c < 1.0:
        raise TheoryError("c must lie in (0, 1)")
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    return 2.0 * beta * kappa1 * (1.0 - c) / (kappa1 * bounds.lambda_n + 2.0)


def t_bar_dynamic(c: float, theta: float, eta_bar: float,
                  bounds: SpectrumBounds) -> float:
    """Acceptance threshold under dynamic accuracy.

    2 kappa1 beta (1 - c - 2 theta) / (kappa1 lambda_n + 2); requires
    1 - c - 2 theta > 0.
    """
    if not 0.0 < c < 1.0:
        raise TheoryError("c must lie in (0, 1)")
    margin = 1.0 - c - 2.0 * theta
    if margin <= 0.0:
        raise TheoryError(f"need 1 - c - 2*theta > 0, got {margin}")
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    return 2.0 * kappa1 * beta * margin / (kappa1 * bounds.lambda_n + 2.0)


def m_constant_bounded(c: float, eta_bar: float, bounds: SpectrumBounds,
                       t_max: float) -> float:
    """Per-iteration contraction constant c beta kappa1^2 lambda_1 t_bar / (1+t_max)^2."""
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    t_bar = t_bar_bounded(c, eta_bar, bounds)
    return c * beta * kappa1 ** 2 * bounds.lambda_1 * t_bar / (1.0 + t_max) ** 2


def m_constant_dynamic(c: float, theta: float, eta_bar: float,
                       bounds: SpectrumBounds, t_max: float) -> float:
    """2 (c - 2 theta) beta kappa1^2 lambda_1 t_bar / (1 + t_max)^2."""
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    t_bar = t_bar_dynamic(c, theta, eta_bar, bounds)
    return (2.0 * (c - 2.0 * theta) * beta * kappa1 ** 2 * bounds.lambda_1
            * t_bar / (1.0 + t_max) ** 2)


def epsilon_threshold(epsilon_f: float, m: float, gamma: float) -> float:
    """Smallest admissible accuracy target under bounded noise.

    4 epsilon_f / ((1 - M)^(-gamma) - 1); any target strictly above it
    keeps the noise penalty below gamma times the guaranteed progress.
    """
    if epsilon_f < 0.0:
        raise TheoryError("epsilon_f must be nonnegative")
    if not 0.0 < m < 1.0:
        raise TheoryError(f"need M in (0, 1), got {m}")
    if not 0.0 < gamma < 1.0:
        raise TheoryError("gamma must lie in (0, 1)")
    if epsilon_f == 0.0:
        return 0.0
    return 4.0 * epsilon_f / math.expm1(-gamma * math.log1p(-m))


def h_bounded(t: float, c: float, eta_bar: float, bounds: SpectrumBounds,
              t_max: float) -> float:
    """Progress per true successful iteration at steplength t (bounded)."""
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    arg = c * beta * kappa1 ** 2 * bounds.lambda_1 * t / (1.0 + t_max) ** 2
    if arg >= 1.0:
        raise TheoryError("log argument not positive in h(t)")
    return -math.log1p(-arg)


def h_dynamic(t: float, c: float, theta: float, eta_bar: float,
              bounds: SpectrumBounds, t_max: float) -> float:
    """Progress per true successful iteration at steplength t (dynamic)."""
    kappa1, _, beta = worst_case_constants(bounds, eta_bar)
    arg = (2.0 * beta * kappa1 ** 2 * bounds.lambda_1 * (c - 2.0 * theta)
           * t / (1.0 + t_max) ** 2)
    if arg >= 1.0:
        raise TheoryError("log argument not positive in h(t)")
    return -math.log1p(-arg)


def r_bounded(epsilon_f: float, epsilon: float) -> float:
    """Per-iteration noise penalty log(1 + 4 epsilon_f / epsilon)."""
    if epsilon_f == 0.0:
        return 0.0
    if epsilon <= 0.0:
        raise TheoryError("epsilon must be positive when epsilon_f > 0")
    return math.log1p(4.0 * epsilon_f / epsilon)


def h_and_r(t: float, epsilon_f: float, epsilon: float, c: float,
            eta_bar: float, bounds: SpectrumBounds, t_max: float,
            variant: str = "bounded", theta: float = 0.0):
    """Return (h(t), r) for the requested variant; r is 0 when dynamic."""
    if variant == "bounded":
        return (h_bounded(t, c, eta_bar, bounds, t_max),
                r_bounded(epsilon_f, epsilon))
    if variant in ("dynamic", "finite_sum"):
        return h_dynamic(t, c, theta, eta_bar, bounds, t_max), 0.0
    raise TheoryError(f"unknown variant {variant!r}")


def gamma_ratio_bounded(epsilon_f: float, epsilon: float, c: float,
                        eta_bar: float, bounds: SpectrumBounds,
                        t_max: float) -> float:
    """The realized penalty/progress ratio r(eps_f) / h(t_bar)."""
    t_bar = t_bar_bounded(c, eta_bar, bounds)
    return r_bounded(epsilon_f, epsilon) / h_bounded(t_bar, c, eta_bar,
                                                     bounds, t_max)


def expected_bound_bounded(delta_g: float, gamma: float, m: float,
                           z_eps: float, tau: float, t_bar: float,
                           t0: float) -> float:
    """Expected hitting-time bound for the bounded-noise driver.

    2(1-d)/((1-2d)^2 - gamma) * [2 Z_eps / -log(1-M)
                                 + (1-gamma) log_tau(t_bar / t0)],
    valid for delta_g < 1/2 - sqrt(gamma)/2.
    """
    if not 0.0 < gamma < 1.0:
        raise TheoryError("gamma must lie in (0, 1)")
    if delta_g >= 0.5 - math.sqrt(gamma) / 2.0:
        raise TheoryError(
            f"need delta_g < 1/2 - sqrt(gamma)/2 = "
            f"{0.5 - math.sqrt(gamma) / 2.0}, got {delta_g}")
    denom = (1.0 - 2.0 * delta_g) ** 2 - gamma
    if denom <= 0.0:
        raise TheoryError("(1 - 2 delta_g)^2 must exceed gamma")
    if not 0.0 < m < 1.0:
        raise TheoryError(f"need M in (0, 1), got {m}")
    lead = 2.0 * (1.0 - delta_g) / denom
    progress = 2.0 * z_eps / (-math.log1p(-m))
    warmup = (1.0 - gamma) * math.log(t_bar / t0) / math.log(tau)
    return lead * (progress + warmup)


def expected_bound_dynamic(delta_g: float, m: float, z_eps: float,
                           tau: float, t_bar: float, t0: float) -> float:
    """Expected hitting-time bound for the dynamic-accuracy driver.

    2(1-d)/(1-2d)^2 * [2 Z_eps / -log(1-M) + log_tau(t_bar / t0)],
    valid for delta_g < 1/2.
    """
    if delta_g >= 0.5:
        raise TheoryError(f"need delta_g < 1/2, got {delta_g}")
    if not 0.0 < m < 1.0:
        raise TheoryError(f"need M in (0, 1), got {m}")
    lead = 2.0 * (1.0 - delta_g) / (1.0 - 2.0 * delta_g) ** 2
    progress = 2.0 * z_eps / (-math.log1p(-m))
    warmup = math.log(t_bar / t0) / math.log(tau)
    return lead * (progress + warmup)


def local_contraction_factor(dist_to_min: float, eta_k: float,
                             lipschitz_hess: float, hess_accuracy: float,
                             bounds: SpectrumBounds, eta_bar: float) -> float:
    """Linear error-contraction factor of a full unit Newton-CG step.

    (1/lambda_1) [L_H/2 * dist + C * eta + 2 lambda_n eta / (1 - eta_bar)];
    a value below one certifies local linear convergence of accurate
    unit steps.
    """
    lam1, lamn = bounds.lambda_1, bounds.lambda_n
    return (lipschitz_hess / 2.0 * dist_to_min + hess_accuracy * eta_k
            + 2.0 * lamn * eta_k / (1.0 - eta_bar)) / lam1


@dataclass(frozen=True)
class TheoryConstants:
    """Bundle of the closed-form constants for one configuration."""

    variant: str
    kappa1: float
    kappa2: float
    beta: float
    t_bar: float
    m: float
    h_of_tbar: float
    r_of_epsf: float
    gamma_ratio: float
    gamma: float = math.nan
    epsilon_threshold: float = math.nan
    expected_bound: float = math.nan

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "variant", "kappa1", "kappa2", "beta", "t_bar", "m",
            "h_of_tbar", "r_of_epsf", "gamma_ratio", "gamma",
            "epsilon_threshold", "expected_bound")}


@dataclass(frozen=True)
class LocalConvergenceParams:
    """Inputs of the local contraction claim.

    ``p = (1 - delta_g)(1 - delta_h)`` is the per-iteration probability
    floor with which the contraction by ``c_tilde < 1`` holds.
    """

    lipschitz_hess: float
    hess_accuracy: float
    c_tilde: float
    delta_g: float = 0.0
    delta_h: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.c_tilde < 1.0:
            raise ValueError("c_tilde must lie in (0, 1)")

    @property
    def p(self) -> float:
        return (1.0 - self.delta_g) * (1.0 - self.delta_h)


def constants_for(variant: str, bounds: SpectrumBounds, ls, epsilon: float,
                  eps_f: float = 0.0, theta: float = 0.0,
                  delta_g: float = 0.0, gamma: float = None,
                  z_eps: float = math.nan) -> TheoryConstants:
    """Assemble the full constants bundle for one run configuration.

    ``gamma`` (bounded variant) and ``z_eps`` enable the threshold and
    expected-bound fields; without them those fields are NaN.
    """
    kappa1, kappa2, beta = worst_case_constants(bounds, ls.eta_bar)
    if variant == "bounded":
        t_bar = t_bar_bounded(ls.c, ls.eta_bar, bounds)
        m = m_constant_bounded(ls.c, ls.eta_bar, bounds, ls.t_max)
        h_tb = h_bounded(t_bar, ls.c, ls.eta_bar, bounds, ls.t_max)
        r = r_bounded(eps_f, epsilon) if epsilon > 0.0 or eps_f == 0.0 else math.nan
        ratio = r / h_tb if math.isfinite(r) else math.nan
        thr = math.nan
        bound = math.nan
        if gamma is not None:
            thr = epsilon_threshold(eps_f, m, gamma)
            if math.isfinite(z_eps):
                bound = expected_bound_bounded(delta_g, gamma, m, z_eps,
                                               ls.tau, t_bar, ls.t0)
        return TheoryConstants(variant, kappa1, kappa2, beta, t_bar, m,
                               h_tb, r, ratio,
                               gamma=math.nan if gamma is None else gamma,
                               epsilon_threshold=thr, expected_bound=bound)
    if variant in ("dynamic", "finite_sum"):
        th = theta if variant == "dynamic" else 0.0
        t_bar = t_bar_dynamic(ls.c, th, ls.eta_bar, bounds)
        m = m_constant_dynamic(ls.c, th, ls.eta_bar, bounds, ls.t_max)
        h_tb = h_dynamic(t_bar, ls.c, th, ls.eta_bar, bounds, ls.t_max)
        bound = math.nan
        if math.isfinite(z_eps):
            bound = expected_bound_dynamic(delta_g, m, z_eps, ls.tau,
                                           t_bar, ls.t0)
        return TheoryConstants(variant, kappa1, kappa2, beta, t_bar, m,
                               h_tb, 0.0, 0.0, expected_bound=bound)
    raise TheoryError(f"unknown variant {variant!r}")


def summary(variant: str, bounds: SpectrumBounds, ls, eps_f: float = 0.0,
            theta: float = 0.0, epsilon: float = math.nan) -> dict:
    """Lightweight constants block embedded in every run record."""
    kappa1, kappa2, beta = worst_case_constants(bounds, ls.eta_bar)
    out = {"variant": variant, "kappa1": kappa1, "kappa2": kappa2,
           "beta": beta}
    try:
        if variant == "bounded":
            t_bar = t_bar_bounded(ls.c, ls.eta_bar, bounds)
            m = m_constant_bounded(ls.c, ls.eta_bar, bounds, ls.t_max)
            h_tb = h_bounded(t_bar, ls.c, ls.eta_bar, bounds, ls.t_max)
            out.update(t_bar=t_bar, m=m, h_of_tbar=h_tb)
            if epsilon > 0.0:
                r = r_bounded(eps_f, epsilon)
                out.update(r_of_epsf=r, gamma_ratio=r / h_tb)
        else:
            th = theta if variant == "dynamic" else 0.0
            t_bar = t_bar_dynamic(ls.c, th, ls.eta_bar, bounds)
            m = m_constant_dynamic(ls.c, th, ls.eta_bar, bounds, ls.t_max)
            h_tb = h_dynamic(t_bar, ls.c, th, ls.eta_bar, bounds, ls.t_max)
            out.update(t_bar=t_bar, m=m, h_of_tbar=h_tb,
                       r_of_epsf=0.0, gamma_ratio=0.0)
    except TheoryError:
        pass
    return out
