import numpy as np
import pytest

from noisyncg import make_quadratic, make_synthetic_logistic


@pytest.fixture(scope="session")
def quad2():
    """Diagonal 2x2 quadratic, A = diag(1, 4), minimizer at 0."""
    return make_quadratic(2, [1.0, 4.0], seed=None)


@pytest.fixture(scope="session")
def quad20():
    """Rotated 20-dim quadratic with spectrum linspace(1, 4)."""
    return make_quadratic(20, np.linspace(1.0, 4.0, 20), seed=20)


@pytest.fixture(scope="session")
def small_logistic():
    """Logistic finite sum, N=200, n=10, unit rows, mu=1e-2."""
    fsp, _, _ = make_synthetic_logistic(200, 10, 1e-2, seed=7)
    return fsp


def random_spd_system(rng, max_dim=50, lo=1.0, hi=4.0):
    """A random SPD matrix with spectrum inside [lo, hi] plus a rhs."""
    n = int(rng.integers(2, max_dim + 1))
    eigs = rng.uniform(lo, hi, size=n)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    h = q @ np.diag(eigs) @ q.T
    h = 0.5 * (h + h.T)
    g = rng.standard_normal(n)
    return h, g
