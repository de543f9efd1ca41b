import math

import numpy as np
import pytest
from mpmath import mp

from noisyncg import (BoundedNoise, DynamicNoise, GradientEstimatorParams,
                      HessianEstimatorParams, SubsamplingParams,
                      estimate_gradient, estimate_hessian,
                      gradient_sample_size, hessian_sample_size,
                      noisy_f_bounded, noisy_f_dynamic, subsampled_gradient,
                      subsampled_hessian)

mp.dps = 50


# --- bounded noise -----------------------------------------------------------

def test_zero_noise_is_exact(quad2):
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0])
    assert noisy_f_bounded(quad2, x, BoundedNoise(0.0), rng) == quad2.eval_f(x)


def test_constant_law(quad2):
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0])
    noisy = noisy_f_bounded(quad2, x, BoundedNoise(0.01, "constant"), rng)
    assert noisy == pytest.approx(quad2.eval_f(x) + 0.01, abs=1e-15)


def test_adversarial_signs(quad2):
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0])
    noise = BoundedNoise(0.01, "adversarial_sign")
    f = quad2.eval_f(x)
    assert noisy_f_bounded(quad2, x, noise, rng, at_trial=True) > f
    assert noisy_f_bounded(quad2, x, noise, rng, at_trial=False) < f


def test_uniform_law_montecarlo(quad2):
    rng = np.random.default_rng(123)
    x = np.array([0.5, -0.5])
    f = quad2.eval_f(x)
    eps = 0.05
    noise = BoundedNoise(eps, "uniform")
    errors = np.array([noisy_f_bounded(quad2, x, noise, rng) - f
                       for _ in range(100_000)])
    assert np.max(np.abs(errors)) <= eps
    assert abs(np.mean(np.abs(errors)) - eps / 2) <= 0.02 * (eps / 2)


def test_bounded_noise_respects_bound_at_large_f():
    # adding +-eps to a large f rounds; the emitted value must still
    # pass the float re-check
    from noisyncg import make_quadratic
    prob = make_quadratic(2, [1.0, 4.0], seed=None)
    x = np.array([3000.0, 10.0])  # f ~ 4.5e6
    rng = np.random.default_rng(0)
    for law in ("constant", "adversarial_sign", "uniform"):
        noise = BoundedNoise(1e-3, law)
        for trial in (True, False):
            v = noisy_f_bounded(prob, x, noise, rng, at_trial=trial)
            assert abs(v - prob.eval_f(x)) <= 1e-3


def test_noise_law_validation():
    with pytest.raises(ValueError):
        BoundedNoise(-1.0)
    with pytest.raises(ValueError):
        BoundedNoise(0.1, "bogus")
    with pytest.raises(ValueError):
        DynamicNoise(0.0)


# --- dynamic noise -----------------------------------------------------------

def test_dynamic_allowance_arithmetic(quad2):
    theta, t_k, sg = 0.05, 1.0, -2.0
    allowance = -theta * t_k * sg
    assert allowance == pytest.approx(0.1)
    rng = np.random.default_rng(1)
    x = np.array([1.0, 1.0])
    f = quad2.eval_f(x)
    for _ in range(100):
        assert abs(noisy_f_dynamic(quad2, x, allowance, rng) - f) <= allowance


def test_dynamic_error_vanishes_with_allowance(quad2):
    rng = np.random.default_rng(2)
    x = np.array([0.1, 0.2])
    f = quad2.eval_f(x)
    for allowance in (1e-3, 1e-9, 1e-15):
        v = noisy_f_dynamic(quad2, x, allowance, rng)
        assert abs(v - f) <= allowance


def test_dynamic_montecarlo_no_violation(quad2):
    rng = np.random.default_rng(3)
    x = np.array([2.0, -1.0])
    f = quad2.eval_f(x)
    allowance = 0.37
    errs = np.array([noisy_f_dynamic(quad2, x, allowance, rng) - f
                     for _ in range(10_000)])
    assert np.max(np.abs(errs)) <= allowance


def test_dynamic_rejects_nonpositive_allowance(quad2):
    rng = np.random.default_rng(4)
    with pytest.raises(ValueError):
        noisy_f_dynamic(quad2, np.zeros(2), 0.0, rng)
    with pytest.raises(ValueError):
        noisy_f_dynamic(quad2, np.zeros(2), -0.1, rng)


# --- gradient estimator ------------------------------------------------------

def test_accurate_branch_uses_closed_form_alpha(quad20):
    rng = np.random.default_rng(5)
    x = np.ones(20)
    grad = quad20.eval_grad(x)
    t_k, eta = 1.0, 0.5
    g, ok = estimate_gradient(quad20, x, t_k, eta,
                              GradientEstimatorParams(0.0), rng)
    assert ok
    alpha = t_k * eta / (1.0 + t_k * eta)
    assert alpha == pytest.approx(1.0 / 3.0)
    err = np.linalg.norm(g - grad)
    assert err == pytest.approx(alpha * np.linalg.norm(grad), rel=1e-12)
    assert err <= t_k * eta * np.linalg.norm(g)


def test_opposite_failure_mode(quad20):
    rng = np.random.default_rng(6)
    x = np.ones(20)
    g, ok = estimate_gradient(quad20, x, 1.0, 0.25,
                              GradientEstimatorParams(1.0), rng)
    assert np.array_equal(g, -quad20.eval_grad(x))
    assert not ok


def test_random_large_failure_mode(quad20):
    rng = np.random.default_rng(7)
    x = np.ones(20)
    params = GradientEstimatorParams(1.0, "random_large")
    flags = [estimate_gradient(quad20, x, 0.5, 0.25, params, rng)[1]
             for _ in range(200)]
    assert not any(flags)  # t*eta small: 3x perturbation always fails


def test_indicator_soundness(quad20):
    rng = np.random.default_rng(8)
    x = np.full(20, -0.7)
    grad = quad20.eval_grad(x)
    params = GradientEstimatorParams(0.5, "random_large")
    for _ in range(500):
        t_k = float(rng.uniform(0.05, 1.0))
        eta = float(rng.uniform(0.01, 0.49))
        g, ok = estimate_gradient(quad20, x, t_k, eta, params, rng)
        holds = (np.linalg.norm(g - grad)
                 <= t_k * eta * np.linalg.norm(g))
        assert ok == holds


def test_indicator_frequency_montecarlo(quad20):
    rng = np.random.default_rng(9)
    x = np.ones(20)
    params = GradientEstimatorParams(0.2)
    hits = sum(estimate_gradient(quad20, x, 1.0, 0.25, params, rng)[1]
               for _ in range(10_000))
    assert 0.78 <= hits / 10_000 <= 0.82


def test_gradient_params_validation():
    with pytest.raises(ValueError):
        GradientEstimatorParams(-0.1)
    with pytest.raises(ValueError):
        GradientEstimatorParams(0.1, "bogus")


# --- Hessian estimator -------------------------------------------------------

def test_exact_hessian_when_accuracy_zero(quad20):
    rng = np.random.default_rng(10)
    x = np.zeros(20)
    apply_h, ok = estimate_hessian(quad20, x, 0.0,
                                   HessianEstimatorParams(0.0, 1.0), rng)
    assert ok
    v = rng.standard_normal(20)
    assert np.array_equal(apply_h(v), quad20.hess_apply(x, v))


def test_hessian_spectrum_always_inside_bounds(quad20):
    rng = np.random.default_rng(11)
    x = np.zeros(20)
    lam1, lamn = quad20.bounds.lambda_1, quad20.bounds.lambda_n
    dirs = np.random.default_rng(0).standard_normal((50, 20))
    for delta in (0.0, 1.0):  # accurate and inaccurate branches
        params = HessianEstimatorParams(delta, 1.0)
        for _ in range(20):
            apply_h, _ = estimate_hessian(quad20, x, 0.25, params, rng)
            for v in dirs:
                q = float(v @ apply_h(v)) / float(v @ v)
                assert lam1 - 1e-9 <= q <= lamn + 1e-9


def test_hessian_indicator_montecarlo(quad20):
    rng = np.random.default_rng(12)
    x = np.zeros(20)
    params = HessianEstimatorParams(0.1, 1.0)
    n_trials = 10_000
    hits = sum(estimate_hessian(quad20, x, 0.25, params, rng)[1]
               for _ in range(n_trials))
    sigma = math.sqrt(0.9 * 0.1 / n_trials)
    assert hits / n_trials >= 0.9 - 3 * sigma


def test_hessian_indicator_soundness(quad20):
    rng = np.random.default_rng(13)
    x = np.zeros(20)
    a = quad20.hess_dense(x)
    eye = np.eye(20)
    params = HessianEstimatorParams(0.5, 1.0)
    eta = 0.25
    for _ in range(100):
        apply_h, ok = estimate_hessian(quad20, x, eta, params, rng)
        h = np.column_stack([apply_h(eye[:, i]) for i in range(20)])
        err = np.max(np.abs(np.linalg.eigvalsh(h - a)))
        assert ok == (err <= params.accuracy_constant * eta)


# --- Bernstein sample sizes --------------------------------------------------

def mp_gradient_size(kappa, gamma, delta, n, big_n):
    r = mp.mpf(kappa) / mp.mpf(gamma)
    bound = 4 * r * (r + mp.mpf(1) / 3) * mp.log(mp.mpf(n + 1) / mp.mpf(delta))
    return int(min(big_n, mp.ceil(bound)))


def mp_hessian_size(kappa, acc, delta, n, big_n):
    r = mp.mpf(kappa) / mp.mpf(acc)
    bound = 4 * r * (r + mp.mpf(1) / 3) * mp.log(2 * mp.mpf(n) / mp.mpf(delta))
    return int(min(big_n, mp.ceil(bound)))


def test_gradient_sample_size_frozen_value():
    got = gradient_sample_size(1.0, 0.1, 0.1, 9, 10 ** 6)
    assert got == mp_gradient_size(1, "0.1", "0.1", 9, 10 ** 6) == 1904


def test_hessian_sample_size_frozen_value():
    got = hessian_sample_size(1.0, 0.1, 1.0, 0.1, 10, 10 ** 6)
    assert got == mp_hessian_size(1, "0.1", "0.1", 10, 10 ** 6) == 2190


def test_sample_sizes_clamp_to_component_count():
    assert gradient_sample_size(1.0, 0.1, 0.1, 9, 500) == 500
    assert hessian_sample_size(1.0, 0.1, 1.0, 0.1, 10, 500) == 500


def test_sample_size_monotonicity():
    # halving delta never decreases the size
    sizes = [gradient_sample_size(1.0, 0.2, d, 9, 10 ** 9)
             for d in (0.4, 0.2, 0.1, 0.05, 0.025)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))
    # size is non-increasing in eta
    hsizes = [hessian_sample_size(1.0, 1.0, eta, 0.1, 10, 10 ** 9)
              for eta in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(a >= b for a, b in zip(hsizes, hsizes[1:]))


def test_sample_size_floor_and_validation():
    assert gradient_sample_size(1e-9, 10.0, 0.5, 3, 100) == 1
    with pytest.raises(ValueError):
        gradient_sample_size(1.0, 0.0, 0.1, 9, 100)
    with pytest.raises(ValueError):
        hessian_sample_size(1.0, 1.0, 0.1, 1.5, 9, 100)


# --- subsampled estimators ---------------------------------------------------

def test_full_sample_matches_exact(small_logistic):
    rng = np.random.default_rng(14)
    x = np.full(small_logistic.dimension, 0.4)
    g = subsampled_gradient(small_logistic, x, small_logistic.n_components, rng)
    assert np.array_equal(g, small_logistic.base.eval_grad(x))
    op = subsampled_hessian(small_logistic, x, small_logistic.n_components, rng)
    v = rng.standard_normal(small_logistic.dimension)
    assert np.array_equal(op(v), small_logistic.base.hess_apply(x, v))


def test_single_component_sample(small_logistic):
    rng = np.random.default_rng(15)
    x = np.zeros(small_logistic.dimension)
    g = subsampled_gradient(small_logistic, x, 1, rng)
    # must equal some component gradient
    matches = [np.allclose(g, small_logistic.subset_grad(np.array([i]), x))
               for i in range(small_logistic.n_components)]
    assert any(matches)


def test_subsampled_gradient_unbiased(small_logistic):
    rng = np.random.default_rng(16)
    x = np.full(small_logistic.dimension, -0.2)
    exact = small_logistic.base.eval_grad(x)
    n_draws, size = 10_000, 10
    draws = np.array([subsampled_gradient(small_logistic, x, size, rng)
                      for _ in range(n_draws)])
    mean = draws.mean(axis=0)
    sem = draws.std(axis=0, ddof=1) / math.sqrt(n_draws)
    assert np.all(np.abs(mean - exact) <= 3 * sem + 1e-12)


def test_subsampled_hessian_unbiased_and_spd(small_logistic):
    rng = np.random.default_rng(17)
    x = np.full(small_logistic.dimension, 0.1)
    exact = small_logistic.base.hess_dense(x)
    lam1, lamn = (small_logistic.base.bounds.lambda_1,
                  small_logistic.base.bounds.lambda_n)
    n_draws, size = 2000, 15
    denses = np.array([subsampled_hessian(small_logistic, x, size, rng).dense()
                       for _ in range(n_draws)])
    mean = denses.mean(axis=0)
    sem = denses.std(axis=0, ddof=1) / math.sqrt(n_draws)
    assert np.all(np.abs(mean - exact) <= 3 * sem + 1e-12)
    eigs = np.linalg.eigvalsh(denses[0])
    assert eigs.min() >= lam1 - 1e-12 and eigs.max() <= lamn + 1e-12


def test_sample_size_out_of_range(small_logistic):
    rng = np.random.default_rng(18)
    x = np.zeros(small_logistic.dimension)
    with pytest.raises(ValueError):
        subsampled_gradient(small_logistic, x, 0, rng)
    with pytest.raises(ValueError):
        subsampled_gradient(small_logistic, x,
                            small_logistic.n_components + 1, rng)


def test_subsampling_params_validation():
    with pytest.raises(ValueError):
        SubsamplingParams(1.0, 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        SubsamplingParams(0.5, 0.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        SubsamplingParams(0.5, 1.0, 0.0, 0.1)
