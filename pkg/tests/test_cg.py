import numpy as np
import pytest

from noisyncg import (CgBudgetError, NonFiniteOperatorError, SpectrumBounds,
                      truncated_cg, verify_step_constants)
from noisyncg.cg import ForcingTerm

from conftest import random_spd_system


def apply_of(h):
    return lambda v: h @ v


def test_identity_solves_in_one_step():
    g = np.array([3.0, 4.0])
    res = truncated_cg(apply_of(np.eye(2)), g, 0.1)
    assert np.array_equal(res.step, -g)
    assert np.linalg.norm(res.residual) == 0.0
    assert res.iterations == 1


def test_diagonal_exact_solve_and_curvature_identity():
    h = np.diag([2.0, 8.0])
    g = np.array([2.0, 8.0])
    res = truncated_cg(apply_of(h), g, 1e-12)
    assert np.allclose(res.step, [-1.0, -1.0], rtol=0, atol=1e-12)
    minus_sg = -float(res.step @ g)
    assert minus_sg == pytest.approx(10.0, rel=1e-12)
    assert abs(res.curvature_product - minus_sg) <= 1e-10 * abs(minus_sg)


def hand_cg_first_iterate(h, g):
    # One CG step for H s = -g from zero, written out independently.
    r0 = -g
    alpha = (r0 @ r0) / (r0 @ (h @ r0))
    s1 = alpha * r0
    r1 = r0 - alpha * (h @ r0)
    return s1, r1


def test_loose_eta_returns_first_cg_iterate():
    h = np.diag([2.0, 8.0])
    g = np.array([2.0, 8.0])
    s_expect, r_expect = hand_cg_first_iterate(h, g)
    assert np.allclose(s_expect, -(68.0 / 520.0) * g, rtol=1e-15)

    res = truncated_cg(apply_of(h), g, 0.99)
    assert res.iterations == 1
    assert np.allclose(res.step, s_expect, rtol=1e-14)
    # returned residual satisfies H s = -g + r
    assert np.allclose(h @ res.step, -g + res.residual, atol=1e-12)
    assert np.linalg.norm(res.residual) <= 0.99 * np.linalg.norm(g)
    assert np.allclose(res.residual, -r_expect, rtol=1e-14)


def test_rejects_degenerate_inputs():
    h = np.eye(3)
    with pytest.raises(ValueError):
        truncated_cg(apply_of(h), np.zeros(3), 0.5)
    with pytest.raises(ValueError):
        truncated_cg(apply_of(h), np.ones(3), 0.0)
    with pytest.raises(ValueError):
        truncated_cg(apply_of(h), np.ones(3), 1.0)


def test_indefinite_operator_raises():
    h = np.diag([1.0, -1.0])
    with pytest.raises(NonFiniteOperatorError):
        truncated_cg(apply_of(h), np.array([1.0, 1.0]), 0.5)


def test_non_finite_operator_raises():
    def bad(v):
        return np.full_like(v, np.nan)

    with pytest.raises(NonFiniteOperatorError):
        truncated_cg(bad, np.ones(3), 0.5)


def test_budget_exhaustion_raises():
    h = np.diag([2.0, 8.0])
    with pytest.raises(CgBudgetError):
        truncated_cg(apply_of(h), np.array([2.0, 8.0]), 1e-12, max_iters=1)


def test_residual_refresh_path_long_solve():
    rng = np.random.default_rng(5)
    n = 150
    eigs = np.linspace(1.0, 100.0, n)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    h = q @ np.diag(eigs) @ q.T
    h = 0.5 * (h + h.T)
    g = rng.standard_normal(n)
    res = truncated_cg(apply_of(h), g, 1e-8)
    assert res.iterations > 50  # refresh fired at least once
    gn = np.linalg.norm(g)
    assert np.linalg.norm(res.residual) <= 1e-8 * gn
    assert np.linalg.norm(h @ res.step + g - res.residual) <= 1e-7 * gn
    minus_sg = -float(res.step @ g)
    assert abs(res.curvature_product - minus_sg) <= 1e-10 * abs(minus_sg)


def test_step_constants_worst_case_values():
    bounds = SpectrumBounds(1.0, 4.0)
    res = truncated_cg(apply_of(np.diag([1.0, 4.0])), np.ones(2), 0.3)
    report = verify_step_constants(res, np.ones(2), bounds, eta_bar=0.5)
    assert report.kappa1 == pytest.approx(0.125)
    assert report.kappa2 == pytest.approx(1.0)
    assert report.beta == pytest.approx(1.0)
    assert report.all_ok


def test_step_constants_identity_equality_margins():
    g = np.array([0.3, -1.2, 4.5])
    res = truncated_cg(apply_of(np.eye(3)), g, 0.5)
    report = verify_step_constants(res, g, SpectrumBounds(1.0, 1.0), 0.5)
    # ||s|| = ||g|| and -g's = ||s||^2 hold with equality
    assert report.kappa2_ok and report.beta_ok and report.kappa1_ok


def test_step_quality_bounds_on_random_spd_batch():
    rng = np.random.default_rng(42)
    bounds = SpectrumBounds(1.0, 4.0)
    for _ in range(100):
        h, g = random_spd_system(rng, max_dim=20)
        for eta in (1e-8, 0.1, 0.5, 0.9):
            res = truncated_cg(apply_of(h), g, eta)
            gn, sn = np.linalg.norm(g), np.linalg.norm(res.step)
            assert np.linalg.norm(res.residual) <= eta * gn
            minus_sg = -float(res.step @ g)
            assert abs(res.curvature_product - minus_sg) <= 1e-10 * abs(minus_sg)
            report = verify_step_constants(res, g, bounds, eta_bar=max(eta, 0.5))
            assert report.all_ok
            # direct-cosine and squared-norm consequences
            cos = minus_sg / (gn * sn)
            bk1 = report.beta * report.kappa1
            assert bk1 - 1e-12 <= cos <= 1.0 + 1e-12
            assert minus_sg >= bk1 * report.kappa1 * gn ** 2 * (1 - 1e-12)


def test_forcing_term_invariants():
    ForcingTerm(0.2, 0.5)
    with pytest.raises(ValueError):
        ForcingTerm(0.5, 0.5)
    with pytest.raises(ValueError):
        ForcingTerm(0.0, 0.5)
    with pytest.raises(ValueError):
        ForcingTerm(0.2, 1.0)
