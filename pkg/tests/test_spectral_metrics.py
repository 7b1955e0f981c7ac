import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risense.metrics import SsimOptions, relative_error, ssim
from risense.spectral import (ResolutionQuery, mp_density, mp_sigma_min_approx, rank_bound,
                              relative_error_bound, sigma_min_incidence_approx, sin_ratio,
                              sin_ratio_approx, sin_ratio_series_coefficient, spectral_report,
                              two_source_vandermonde, vandermonde_extreme_singvals)


def test_vandermonde_singvals_frozen_oracle():
    # dense SVD of the explicit 8 x 2 matrix, theta = 0.3, delta = 0.05, d/lambda = 0.5
    smax, smin = vandermonde_extreme_singvals(0.3, 0.05, 8, 0.5, 1.0)
    assert smax == pytest.approx(3.94241733, abs=1e-8)
    assert smin == pytest.approx(0.67627334, abs=1e-8)


def test_vandermonde_degenerate_case():
    with pytest.raises(ValueError):
        vandermonde_extreme_singvals(0.2, 0.0, 8, 0.5, 1.0)
    smax, smin = vandermonde_extreme_singvals(0.2, 0.0, 8, 0.5, 1.0, allow_degenerate=True)
    assert (smax, smin) == pytest.approx((4.0, 0.0))


def test_sin_ratio_limits():
    assert sin_ratio(6, 0.0) == pytest.approx(6.0)
    assert sin_ratio(6, np.pi) == pytest.approx(-6.0)  # sin(6x)/sin(x) -> N cos(N pi)/cos(pi)
    assert sin_ratio(5, np.pi) == pytest.approx(5.0)


def test_series_coefficients_match_cosine_expansion():
    # sin 5x / sin x = 1 + 2 cos 2x + 2 cos 4x = 5 - 20 x^2 + (68/3) x^4 - ...
    assert sin_ratio_series_coefficient(5, 0) == pytest.approx(5.0)
    assert sin_ratio_series_coefficient(5, 1) == pytest.approx(-20.0)
    assert sin_ratio_series_coefficient(5, 2) == pytest.approx(68.0 / 3.0)
    n = 9
    assert sin_ratio_series_coefficient(n, 1) == pytest.approx(-n * (n * n - 1) / 6)
    assert sin_ratio_approx(n, 0.0) == n


def test_sigma_min_small_separation():
    d, lam, n, theta, delta = 0.5, 1.0, 32, 0.2, 1e-4
    exact = vandermonde_extreme_singvals(theta, delta, n, d, lam)[1]
    assert sigma_min_incidence_approx(theta, delta, n, d, lam) == pytest.approx(exact, rel=1e-3)


def test_mp_helpers():
    assert mp_sigma_min_approx(2000, 200) == pytest.approx(30.5792239, rel=1e-8)
    with pytest.raises(ValueError):
        mp_sigma_min_approx(10, 10)
    assert mp_density(0.01, 0.25) == 0.0
    with pytest.raises(ValueError):
        mp_density(1.0, 1.5)


def test_rank_bound_formulas():
    assert rank_bound("dedicated", 100, [10] * 4, [50] * 4) == 40
    assert rank_bound("dedicated", 100, [100] * 4, [50] * 4) == 100
    assert rank_bound("shared", 100, 30, [50] * 4) == 30
    with pytest.raises(ValueError):
        rank_bound("mixed", 10, 1, [1])


def test_spectral_report_identity():
    rep = spectral_report(np.eye(5), bound=5)
    assert rep.rank == 5 and rep.condition_number == pytest.approx(1.0)
    assert spectral_report(np.zeros((2, 2))).condition_number == math.inf


def test_bound_scaling_and_guards():
    q = ResolutionQuery(0.2, 1e-3, 50, 0.01, 0.01, 500, 10.0)
    half = ResolutionQuery(0.2, 5e-4, 50, 0.01, 0.01, 500, 10.0)
    assert relative_error_bound(half) == pytest.approx(2 * relative_error_bound(q))
    with pytest.raises(ValueError):
        ResolutionQuery(math.pi / 2, 1e-3, 50, 0.01, 0.01, 500, 10.0)
    with pytest.raises(ValueError, match="T must exceed N"):
        ResolutionQuery(0.2, 1e-3, 50, 0.01, 0.01, 50, 10.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_product_singular_value_inequality(t, extra_n, m, seed):
    # sigma_min(AB) >= sigma_min(A) sigma_min(B) for full-column-rank A (T x N), B (N x M)
    rng = np.random.default_rng(seed)
    n = max(m, 1) + extra_n - 1
    t = max(t, n)
    a = rng.standard_normal((t, n)) + 1j * rng.standard_normal((t, n))
    b = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    sa = np.linalg.svd(a, compute_uv=False)[-1]
    sb = np.linalg.svd(b, compute_uv=False)[-1]
    sab = np.linalg.svd(a @ b, compute_uv=False)[-1]
    assert sab >= sa * sb * (1 - 1e-10)


def test_relative_error_phase_alignment():
    truth = np.array([1 + 1j, 2.0, -1j])
    assert relative_error(truth * np.exp(0.7j), truth, phase_aware=True) == pytest.approx(0, abs=1e-12)
    assert relative_error(truth * np.exp(0.7j), truth) > 0.5
    with pytest.raises(ValueError):
        relative_error(truth, np.zeros(3))


def test_ssim_basics():
    truth = np.zeros((6, 6))
    truth[1:3, 2:5] = 1.0
    assert ssim(truth, truth) == pytest.approx(1.0)
    assert ssim(np.zeros_like(truth), truth) < 0.1
    assert 0.0 <= ssim(np.random.default_rng(0).random((6, 6)), truth) <= 1.0
    with pytest.raises(ValueError):
        ssim(truth, truth[:5])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_ssim_symmetric_under_fixed_constants(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random(25), rng.random(25)
    opts = SsimOptions(dynamic_range=1.0)
    assert ssim(a, b, opts) == pytest.approx(ssim(b, a, opts), abs=1e-12)


def test_two_source_vandermonde_columns():
    v = two_source_vandermonde(0.1, 0.2, 4, 0.5, 1.0)
    assert v.shape == (4, 2)
    np.testing.assert_allclose(np.abs(v), 1.0)
