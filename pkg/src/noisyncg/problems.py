"""Strongly convex test problems with certified spectral bounds.

Two families:

* random-rotation quadratics, where the minimizer, minimum value and
  Hessian spectrum are exact by construction;
* ridge-regularized logistic regression as a finite sum, with bounds
  certified analytically (per-sample curvature of the logistic loss is
  capped by 1/4) and the minimizer computed once by a damped Newton
  reference solve and cached on the instance.

Problems are immutable after construction; concurrent evaluation from
several solver replicas is safe.
"""

import struct
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .cg import SpectrumBounds

# Negative optimality gaps beyond this (scaled by max(1, |f*|)) signal a
# wrong reference minimum rather than rounding.
GAP_ROUNDING_FLOOR = 1e-14

REFERENCE_GRAD_TOL = 1e-12


class ReferenceSolveError(RuntimeError):
    """The high-accuracy reference solve failed to converge."""


@dataclass(frozen=True)
class Problem:
    """A strongly convex objective with exact evaluations.

    ``hess_apply(x, v)`` returns the Hessian-vector product at x;
    ``hess_dense(x)`` the full matrix (used by estimators that perturb
    and eigen-clip, acceptable at desk scale).  ``bounds`` certifies
    lambda_1 I <= Hessian <= lambda_n I everywhere.
    """

    dimension: int
    eval_f: Callable[[np.ndarray], float]
    eval_grad: Callable[[np.ndarray], np.ndarray]
    hess_apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    hess_dense: Callable[[np.ndarray], np.ndarray]
    bounds: SpectrumBounds
    minimizer: Optional[np.ndarray] = None
    min_value: Optional[float] = None
    lipschitz_hess: Optional[float] = None
    name: str = "problem"


@dataclass(frozen=True)
class FiniteSumProblem:
    """Mean of n_components strongly convex terms f_i.

    ``subset_*`` evaluate the mean over an index array, vectorized.
    ``kappa_grad(x)`` and ``kappa_hess(x)`` are computable upper bounds
    on max_i ||grad f_i(x)|| and max_i ||hess f_i(x)||, used to size
    Bernstein-style subsamples.  ``base`` is the full-sum objective and
    is built on the same subset code path, so a full sorted sample
    reproduces exact quantities bit for bit.
    """

    n_components: int
    base: Problem
    subset_f: Callable[[np.ndarray, np.ndarray], float]
    subset_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    subset_hess_apply: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    subset_hess_dense: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kappa_grad: Callable[[np.ndarray], float]
    kappa_hess: Callable[[np.ndarray], float]

    @property
    def dimension(self) -> int:
        return self.base.dimension


def optimality_gap(problem: Problem, x) -> float:
    """Ground-truth gap f(x) - f*, clamped at zero against rounding.

    Requires a known minimum value (quadratics have it exactly, the
    logistic builder caches a reference solve).  A negative gap beyond
    the rounding floor raises: it means f* is wrong.
    """
    if problem.min_value is None:
        raise ValueError(f"problem {problem.name!r} has no reference minimum")
    gap = float(problem.eval_f(np.asarray(x, dtype=float))) - problem.min_value
    if gap < 0.0:
        floor = GAP_ROUNDING_FLOOR * max(1.0, abs(problem.min_value))
        if gap < -floor:
            raise ValueError(
                f"gap {gap} is negative beyond rounding; reference minimum "
                f"of {problem.name!r} is inconsistent")
        return 0.0
    return gap


def make_quadratic(dimension: int, spectrum, shift=None,
                   seed: Optional[int] = None) -> Problem:
    """Quadratic f(x) = 0.5 (x-shift)' A (x-shift) with known spectrum.

    A is diag(spectrum) when ``seed`` is None, otherwise an orthogonal
    similarity of it drawn from the seeded generator.  The minimizer is
    ``shift`` and the minimum value exactly zero.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.size != dimension:
        raise ValueError("spectrum must provide one eigenvalue per dimension")
    if np.any(spectrum <= 0.0):
        raise ValueError("spectrum entries must be positive")
    if shift is None:
        shift = np.zeros(dimension)
    shift = np.asarray(shift, dtype=float)

    if seed is None:
        a = np.diag(spectrum)
    else:
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
        a = q @ np.diag(spectrum) @ q.T
        a = 0.5 * (a + a.T)

    def eval_f(x):
        d = x - shift
        return 0.5 * float(d @ (a @ d))

    def eval_grad(x):
        return a @ (x - shift)

    bounds = SpectrumBounds(float(spectrum.min()), float(spectrum.max()))
    return Problem(
        dimension=dimension,
        eval_f=eval_f,
        eval_grad=eval_grad,
        hess_apply=lambda x, v: a @ v,
        hess_dense=lambda x: a,
        bounds=bounds,
        minimizer=shift,
        min_value=0.0,
        lipschitz_hess=0.0,
        name=f"quadratic(n={dimension})",
    )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def make_logistic(features, labels, ridge: float) -> FiniteSumProblem:
    """Ridge-regularized logistic regression as a finite sum.

    Component i is log(1 + exp(-y_i a_i'x)) + (ridge/2) ||x||^2 with
    labels in {-1, +1}.  Certified bounds: lambda_1 = ridge and
    lambda_n = ridge + max_i ||a_i||^2 / 4 from the 1/4 sigmoid
    curvature cap; the same cap gives the per-component gradient and
    Hessian norm bounds used for subsample sizing.  The reference
    minimizer is computed here once by damped Newton to gradient norm
    1e-12 and cached.
    """
    a = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if a.ndim != 2 or y.shape != (a.shape[0],):
        raise ValueError("features must be (N, n), labels must be (N,)")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must all be -1 or +1")
    if ridge <= 0.0:
        raise ValueError(f"ridge must be positive, got {ridge}")

    n_samples, dim = a.shape
    row_norms = np.linalg.norm(a, axis=1)
    max_row = float(row_norms.max())
    all_idx = np.arange(n_samples)

    def subset_f(idx, x):
        z = -y[idx] * (a[idx] @ x)
        # log(1 + exp(z)) computed stably
        loss = np.logaddexp(0.0, z)
        return float(loss.mean() + 0.5 * ridge * (x @ x))

    def subset_grad(idx, x):
        z = -y[idx] * (a[idx] @ x)
        w = -y[idx] * _sigmoid(z)
        return (a[idx].T @ w) / idx.size + ridge * x

    def _curvatures(idx, x):
        z = -y[idx] * (a[idx] @ x)
        sig = _sigmoid(z)
        return sig * (1.0 - sig)

    def subset_hess_apply(idx, x, v):
        w = _curvatures(idx, x)
        return (a[idx].T @ (w * (a[idx] @ v))) / idx.size + ridge * v

    def subset_hess_dense(idx, x):
        w = _curvatures(idx, x)
        h = (a[idx].T * w) @ a[idx] / idx.size + ridge * np.eye(dim)
        return 0.5 * (h + h.T)

    bounds = SpectrumBounds(ridge, ridge + max_row ** 2 / 4.0)
    lipschitz = max_row ** 3 / (6.0 * np.sqrt(3.0))  # |sigma''| <= 1/(6 sqrt 3)

    base = Problem(
        dimension=dim,
        eval_f=lambda x: subset_f(all_idx, x),
        eval_grad=lambda x: subset_grad(all_idx, x),
        hess_apply=lambda x, v: subset_hess_apply(all_idx, x, v),
        hess_dense=lambda x: subset_hess_dense(all_idx, x),
        bounds=bounds,
        lipschitz_hess=lipschitz,
        name=f"logistic(N={n_samples}, n={dim}, mu={ridge:g})",
    )
    x_star, f_star = _reference_minimize(base)
    base = replace(base, minimizer=x_star, min_value=f_star)

    return FiniteSumProblem(
        n_components=n_samples,
        base=base,
        subset_f=subset_f,
        subset_grad=subset_grad,
        subset_hess_apply=subset_hess_apply,
        subset_hess_dense=subset_hess_dense,
        kappa_grad=lambda x: max_row + ridge * float(np.linalg.norm(x)),
        kappa_hess=lambda x: max_row ** 2 / 4.0 + ridge,
    )


def _reference_minimize(problem: Problem, max_iters: int = 200):
    """Damped exact Newton to ||grad|| <= 1e-12; returns (x*, f*).

    Backtracks on f while the gradient is large; once f-differences
    approach rounding it switches to full Newton steps, whose quadratic
    local convergence finishes the solve.
    """
    x = np.zeros(problem.dimension)
    for _ in range(max_iters):
        g = problem.eval_grad(x)
        gn = float(np.linalg.norm(g))
        if gn <= REFERENCE_GRAD_TOL:
            return x, float(problem.eval_f(x))
        step = np.linalg.solve(problem.hess_dense(x), -g)
        if gn > 1e-6:
            f = problem.eval_f(x)
            t = 1.0
            for _ in range(60):
                trial = x + t * step
                if problem.eval_f(trial) <= f + 1e-4 * t * float(g @ step):
                    break
                t *= 0.5
            x = trial
        else:
            x = x + step
    raise ReferenceSolveError(
        f"reference Newton solve on {problem.name!r} did not reach "
        f"gradient norm {REFERENCE_GRAD_TOL}")


def make_synthetic_logistic(n_samples: int, dimension: int, ridge: float,
                            seed: int, unit_rows: bool = True):
    """Seeded synthetic logistic instance.

    Features are standard normal, optionally rescaled to unit row norm
    so the gradient-norm bound is tight; labels come from a planted
    parameter through the logistic model.  Returns
    (FiniteSumProblem, features, labels).
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_samples, dimension))
    if unit_rows:
        a /= np.linalg.norm(a, axis=1, keepdims=True)
    planted = rng.standard_normal(dimension)
    prob_pos = _sigmoid(a @ planted)
    y = np.where(rng.random(n_samples) < prob_pos, 1.0, -1.0)
    return make_logistic(a, y, ridge), a, y


# ---------------------------------------------------------------------------
# Dataset files: a dense text matrix and a compact binary twin.
#
# Text form: one sample per row, features then the {-1,+1} label in the
# last column.  Binary form: little-endian header
#     magic  b"NCGB"  (4 bytes)
#     version uint32  (currently 1)
#     N       uint64  number of samples
#     n       uint64  number of features
# followed by N*(n+1) row-major float64 values laid out like the text
# matrix.
# ---------------------------------------------------------------------------

DATASET_MAGIC = b"NCGB"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def save_dataset_text(path, features, labels):
    m = np.column_stack([features, labels])
    np.savetxt(path, m, fmt="%.17g")


def load_dataset_text(path):
    m = np.atleast_2d(np.loadtxt(path))
    return _split_matrix(m)


def save_dataset_binary(path, features, labels):
    a = np.ascontiguousarray(features, dtype="<f8")
    y = np.asarray(labels, dtype="<f8")
    n_samples, dim = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, n_samples, dim))
        np.column_stack([a, y]).astype("<f8").tofile(fh)


def load_dataset_binary(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated dataset header")
        magic, version, n_samples, dim = _HEADER.unpack(header)
        if magic != DATASET_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != DATASET_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        m = np.fromfile(fh, dtype="<f8", count=n_samples * (dim + 1))
    if m.size != n_samples * (dim + 1):
        raise ValueError(f"{path}: truncated dataset payload")
    return _split_matrix(m.reshape(n_samples, dim + 1))


def _split_matrix(m):
    features, labels = m[:, :-1], m[:, -1]
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("dataset labels must all be -1 or +1")
    return features, labels
