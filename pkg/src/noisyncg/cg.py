"""Truncated conjugate gradient for inexact Newton steps.

Solves H s = -g from a zero initial guess and returns the first CG
iterate whose residual satisfies the relative forcing-term test
``||r|| <= eta * ||g||``.  Starting from zero is mandatory: it is what
guarantees the step-quality constants checked by
:func:`verify_step_constants` and the identity ``s'Hs = -s'g``.

The module is matrix-free.  ``hessian_apply`` is any callable mapping a
vector to H @ v, so dense, sparse and subsampled operators share one
code path.  Everything here is pure and reentrant.
"""

from dataclasses import dataclass

import numpy as np

# Explicit residual recomputation period; bounds recurrence drift at a
# cost of one extra operator application every RESIDUAL_REFRESH steps.
RESIDUAL_REFRESH = 50


class CgError(RuntimeError):
    """Base class for failures of the truncated CG solve."""


class NonFiniteOperatorError(CgError):
    """Operator produced NaN/Inf, or curvature is not positive."""


class CgBudgetError(CgError):
    """Iteration budget hit before the residual test was satisfied."""


@dataclass(frozen=True)
class ForcingTerm:
    """Relative residual tolerance eta_k, capped by eta_bar.

    Invariant: 0 < eta_k < eta_bar < 1.
    """

    eta_k: float
    eta_bar: float

    def __post_init__(self):
        if not (0.0 < self.eta_k < self.eta_bar < 1.0):
            raise ValueError(
                f"forcing term must satisfy 0 < eta_k < eta_bar < 1, "
                f"got eta_k={self.eta_k}, eta_bar={self.eta_bar}")


@dataclass(frozen=True)
class SpectrumBounds:
    """Certified eigenvalue interval [lambda_1, lambda_n], 0 < lambda_1."""

    lambda_1: float
    lambda_n: float

    def __post_init__(self):
        if not (0.0 < self.lambda_1 <= self.lambda_n):
            raise ValueError(
                f"need 0 < lambda_1 <= lambda_n, got "
                f"({self.lambda_1}, {self.lambda_n})")


@dataclass(frozen=True)
class CgResult:
    """Outcome of one truncated CG solve of H s = -g.

    ``residual`` is r = H s + g as maintained by the CG recurrence, so
    ``norm(residual) <= eta * norm(g)`` holds exactly as returned, and
    H s = -g + r holds to solver tolerance.  ``curvature_product``
    accumulates s'Hs across the conjugate directions; it equals -s'g up
    to rounding for any truncation point.
    """

    step: np.ndarray
    residual: np.ndarray
    iterations: int
    curvature_product: float


def truncated_cg(hessian_apply, g, eta, max_iters=None) -> CgResult:
    """Run CG on H s = -g from s0 = 0 until ||r|| <= eta * ||g||.

    Parameters
    ----------
    hessian_apply : callable
        v -> H @ v for a symmetric positive definite H.
    g : array
        Right-hand side sign convention is H s = -g; ``g`` must be
        nonzero (callers detect stationarity before entering CG).
    eta : float
        Forcing term in (0, 1).  Ties in the residual test count as
        satisfied.
    max_iters : int, optional
        Defaults to the space dimension (finite termination of CG in
        exact arithmetic).

    Raises
    ------
    NonFiniteOperatorError
        Non-finite values or nonpositive curvature encountered, which
        signals an indefinite or ill-posed operator.
    CgBudgetError
        Budget exhausted before the residual test held (eta too small
        for the iteration budget).
    """
    g = np.asarray(g, dtype=float)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise ValueError("truncated_cg requires a nonzero right-hand side")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    n = g.size
    if max_iters is None:
        max_iters = n

    threshold = eta * gnorm
    s = np.zeros_like(g)
    r = -g          # recurrence residual of H s = -g, i.e. -g - H s
    p = r.copy()
    rr = float(r @ r)
    curvature = 0.0

    for it in range(1, int(max_iters) + 1):
        hp = np.asarray(hessian_apply(p), dtype=float)
        php = float(p @ hp)
        if not np.isfinite(php) or not np.all(np.isfinite(hp)):
            raise NonFiniteOperatorError("non-finite operator product in CG")
        if php <= 0.0:
            raise NonFiniteOperatorError(
                f"nonpositive curvature {php} in CG; operator is not SPD")
        alpha = rr / php
        s += alpha * p
        curvature += alpha * alpha * php
        if it % RESIDUAL_REFRESH == 0:
            r = -g - np.asarray(hessian_apply(s), dtype=float)
        else:
            r -= alpha * hp
        rr_next = float(r @ r)
        if not np.isfinite(rr_next):
            raise NonFiniteOperatorError("non-finite residual in CG")
        if np.sqrt(rr_next) <= threshold:
            return CgResult(step=s, residual=-r, iterations=it,
                            curvature_product=curvature)
        p = r + (rr_next / rr) * p
        rr = rr_next

    raise CgBudgetError(
        f"CG did not reach ||r|| <= {threshold:.3e} within {max_iters} "
        f"iterations")


@dataclass(frozen=True)
class StepConstantsReport:
    """Which of the worst-case step-quality bounds held for one step."""

    kappa1_ok: bool
    kappa2_ok: bool
    beta_ok: bool
    kappa1: float
    kappa2: float
    beta: float

    @property
    def all_ok(self) -> bool:
        return self.kappa1_ok and self.kappa2_ok and self.beta_ok


def verify_step_constants(result: CgResult, g, bounds: SpectrumBounds,
                          eta_bar: float) -> StepConstantsReport:
    """Check the CG step against its guaranteed quality constants.

    With the operator spectrum inside ``bounds`` and forcing term at
    most ``eta_bar``, a zero-initialized CG step satisfies

        kappa1 * ||g|| <= ||s|| <= kappa2 * ||g||,   -g's >= beta * ||s||^2

    with kappa1 = (1 - eta_bar) / lambda_n, kappa2 = 1 / lambda_1 and
    beta = lambda_1.  Violations are reported, never raised.
    """
    g = np.asarray(g, dtype=float)
    s = result.step
    kappa1 = (1.0 - eta_bar) / bounds.lambda_n
    kappa2 = 1.0 / bounds.lambda_1
    beta = bounds.lambda_1
    gn = float(np.linalg.norm(g))
    sn = float(np.linalg.norm(s))
    minus_gs = -float(g @ s)
    return StepConstantsReport(
        kappa1_ok=kappa1 * gn <= sn,
        kappa2_ok=sn <= kappa2 * gn,
        beta_ok=minus_gs >= beta * float(s @ s),
        kappa1=kappa1, kappa2=kappa2, beta=beta)
