import math

import numpy as np
import pytest

from noisyncg import (LinesearchParams, SpectrumBounds, TheoryError,
                      epsilon_threshold, expected_bound_bounded,
                      expected_bound_dynamic, h_and_r,
                      local_contraction_factor, t_bar_bounded, t_bar_dynamic,
                      worst_case_constants)
from noisyncg.theory import (constants_for, gamma_ratio_bounded, h_bounded,
                             h_dynamic, m_constant_bounded, r_bounded,
                             summary)

B14 = SpectrumBounds(1.0, 4.0)


def test_worst_case_constant_chains():
    for eta_bar in (0.1, 0.5, 0.9):
        for lo, hi in ((1.0, 4.0), (0.01, 0.26), (2.0, 2.0)):
            k1, k2, beta = worst_case_constants(SpectrumBounds(lo, hi), eta_bar)
            assert beta * k1 <= 1.0 + 1e-12
            assert hi * k1 >= (1.0 - eta_bar) - 1e-12
            assert k1 * lo <= k2 * lo <= 1.0 + 1e-12
            assert k1 <= k2


def test_t_bar_bounded_arithmetic():
    assert t_bar_bounded(0.1, 0.5, B14) == 0.09
    # c -> 1 and eta_bar -> 1 both drive the threshold to zero
    assert t_bar_bounded(0.999, 0.5, B14) < 2e-4
    assert t_bar_bounded(0.1, 0.9999, B14) < 2e-4
    with pytest.raises(TheoryError):
        t_bar_bounded(1.0, 0.5, B14)


def test_t_bar_dynamic_arithmetic():
    assert t_bar_dynamic(0.1, 0.0, 0.5, B14) == t_bar_bounded(0.1, 0.5, B14)
    assert t_bar_dynamic(0.1, 0.04, 0.5, B14) == pytest.approx(
        2 * 0.125 * 1 * 0.82 / 2.5, rel=1e-15)
    # decreasing in theta
    vals = [t_bar_dynamic(0.1, th, 0.5, B14) for th in (0.0, 0.01, 0.02, 0.04)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(TheoryError):
        t_bar_dynamic(0.9, 0.06, 0.5, B14)  # 1 - c - 2 theta <= 0


def test_epsilon_threshold_arithmetic():
    assert epsilon_threshold(0.0, 0.1, 0.5) == 0.0
    got = epsilon_threshold(0.01, 0.1, 0.5)
    assert got == pytest.approx(0.04 / (0.9 ** -0.5 - 1.0), rel=1e-12)
    assert got == pytest.approx(0.7394733, rel=1e-6)
    # threshold grows as M shrinks
    vals = [epsilon_threshold(0.01, m, 0.5) for m in (0.2, 0.1, 0.05, 0.01)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(TheoryError):
        epsilon_threshold(0.01, 1.5, 0.5)
    with pytest.raises(TheoryError):
        epsilon_threshold(0.01, 0.1, 0.0)


def test_h_and_r_values():
    h0, r0 = h_and_r(0.0, 0.0, 1.0, 0.1, 0.5, B14, 1.0, "bounded")
    assert h0 == 0.0 and r0 == 0.0
    # h nondecreasing on [0, t_max]
    grid = np.linspace(0.0, 1.0, 50)
    hs = [h_bounded(t, 0.1, 0.5, B14, 1.0) for t in grid]
    assert all(a <= b for a, b in zip(hs, hs[1:]))
    hs_dyn = [h_dynamic(t, 0.1, 0.02, 0.5, B14, 1.0) for t in grid]
    assert all(a <= b for a, b in zip(hs_dyn, hs_dyn[1:]))
    # dynamic variant has no noise penalty
    _, r_dyn = h_and_r(0.5, 0.5, 1.0, 0.1, 0.5, B14, 1.0, "dynamic", 0.02)
    assert r_dyn == 0.0
    assert r_bounded(0.0, 1.0) == 0.0
    with pytest.raises(TheoryError):
        h_and_r(0.5, 0.0, 1.0, 0.1, 0.5, B14, 1.0, "bogus")


def test_m_constants_and_gamma_ratio_consistency():
    m = m_constant_bounded(0.1, 0.5, B14, 1.0)
    t_bar = t_bar_bounded(0.1, 0.5, B14)
    assert m == pytest.approx(0.1 * 1.0 * 0.125 ** 2 * 1.0 * t_bar / 4.0,
                              rel=1e-15)
    assert h_bounded(t_bar, 0.1, 0.5, B14, 1.0) == pytest.approx(
        -math.log1p(-m), rel=1e-12)
    # setting epsilon exactly at the threshold makes the ratio hit gamma
    gamma = 0.25
    eps = epsilon_threshold(1e-3, m, gamma)
    ratio = gamma_ratio_bounded(1e-3, eps, 0.1, 0.5, B14, 1.0)
    assert ratio == pytest.approx(gamma, rel=1e-9)
    # twice the threshold gives an admissible ratio below gamma
    ratio2 = gamma_ratio_bounded(1e-3, 2 * eps, 0.1, 0.5, B14, 1.0)
    assert ratio2 < gamma


def test_expected_bound_bounded_arithmetic():
    val = expected_bound_bounded(0.1, 0.25, 0.1, math.log(1e4), 0.5,
                                 t_bar=1.0, t0=1.0)
    lead = 2 * 0.9 / (0.8 ** 2 - 0.25)
    logterm = 2 * math.log(1e4) / -math.log1p(-0.1)
    assert val == pytest.approx(lead * logterm, rel=1e-14)
    assert val == pytest.approx(806.93, abs=0.01)
    # starting above t_bar adds warmup iterations to the bound
    more = expected_bound_bounded(0.1, 0.25, 0.1, math.log(1e4), 0.5,
                                  t_bar=0.25, t0=1.0)
    assert more > val
    # gamma approaching (1-2d)^2 blows the bound up
    close = expected_bound_bounded(0.1, 0.6399, 0.1, 1.0, 0.5, 1.0, 1.0)
    far = expected_bound_bounded(0.1, 0.25, 0.1, 1.0, 0.5, 1.0, 1.0)
    assert close > 100 * far
    with pytest.raises(TheoryError):
        expected_bound_bounded(0.3, 0.25, 0.1, 1.0, 0.5, 1.0, 1.0)
    with pytest.raises(TheoryError):
        expected_bound_bounded(0.1, 0.65, 0.1, 1.0, 0.5, 1.0, 1.0)


def test_expected_bound_dynamic_arithmetic():
    # delta_g = 0 reduces the prefactor to 2
    val0 = expected_bound_dynamic(0.0, 0.1, 1.0, 0.5, 1.0, 1.0)
    assert val0 == pytest.approx(2 * (2 * 1.0 / -math.log1p(-0.1)), rel=1e-14)
    # monotone increasing in delta_g on [0, 0.5)
    vals = [expected_bound_dynamic(d, 0.1, 1.0, 0.5, 1.0, 1.0)
            for d in np.linspace(0.0, 0.45, 10)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(TheoryError):
        expected_bound_dynamic(0.5, 0.1, 1.0, 0.5, 1.0, 1.0)


def test_local_contraction_factor_values():
    got = local_contraction_factor(0.1, 0.05, lipschitz_hess=2.0,
                                   hess_accuracy=1.0,
                                   bounds=SpectrumBounds(1.0, 2.0),
                                   eta_bar=0.5)
    assert got == pytest.approx(0.1 + 0.05 + 0.4, rel=1e-14)
    assert local_contraction_factor(0.0, 0.0, 2.0, 1.0, B14, 0.5) == 0.0
    # linear and increasing in each argument
    base = local_contraction_factor(0.1, 0.05, 2.0, 1.0, B14, 0.5)
    assert local_contraction_factor(0.2, 0.05, 2.0, 1.0, B14, 0.5) > base
    assert local_contraction_factor(0.1, 0.06, 2.0, 1.0, B14, 0.5) > base
    assert local_contraction_factor(0.1, 0.05, 3.0, 1.0, B14, 0.5) > base


def test_local_convergence_params():
    from noisyncg import LocalConvergenceParams
    p = LocalConvergenceParams(lipschitz_hess=2.0, hess_accuracy=1.0,
                               c_tilde=0.9, delta_g=0.1, delta_h=0.1)
    assert p.p == pytest.approx(0.81)
    with pytest.raises(ValueError):
        LocalConvergenceParams(2.0, 1.0, c_tilde=1.0)


def test_constants_bundle_and_summary():
    ls = LinesearchParams()
    tc = constants_for("bounded", B14, ls, epsilon=1000.0, eps_f=1e-3,
                       delta_g=0.1, gamma=0.25, z_eps=math.log(1e4))
    assert tc.kappa1 == 0.125 and tc.kappa2 == 1.0 and tc.beta == 1.0
    assert 0.0 < tc.m < 1.0
    assert math.isfinite(tc.expected_bound)
    assert tc.epsilon_threshold > 0.0
    d = tc.as_dict()
    assert d["variant"] == "bounded"

    s = summary("dynamic", B14, ls, theta=0.02, epsilon=1e-6)
    assert s["r_of_epsf"] == 0.0
    assert s["t_bar"] == pytest.approx(t_bar_dynamic(0.1, 0.02, 0.5, B14))

    s2 = summary("finite_sum", B14, ls)
    assert s2["t_bar"] == pytest.approx(t_bar_dynamic(0.1, 0.0, 0.5, B14))
