import math

import numpy as np
import pytest

from qbsacd.acd import (ExplosivePathError, MomentNotFiniteError, ParamVector, PathInit,
                        SingularInformationError, acd_moment, check_stationarity,
                        dispersion_index, hessian, innovation_mgf, innovation_moment, loglik,
                        observed_info_se, quantile_path, score)
from qbsacd.dist import SkewQBS
from qbsacd.estimate import fit_direct_ml
from conftest import simulate
from oracles import bs_acd_loglik, central_diff

LAMBDA_MAX_R2 = 0.85207972893961476479


def test_static_path_is_constant():
    th = ParamVector(0.5, 0.3, (0.0,), (0.0,), 0.2, 0.4)
    xi = quantile_path(np.array([1.0, 5.0, 0.2]), th)
    assert np.allclose(xi, math.exp(0.3), rtol=0, atol=1e-15)


def test_hand_recursion():
    th = ParamVector(0.5, 0.2, (0.7,), (0.1,), 0.0, 0.5)
    y = np.array([1.0, 2.0, 1.0])
    xi = quantile_path(y, th, init=1.0)
    x1 = math.exp(0.2 + 0.7 * 0.0 + 0.1 * 1.0 / 1.0)
    x2 = math.exp(0.2 + 0.7 * math.log(x1) + 0.1 * 1.0 / x1)
    x3 = math.exp(0.2 + 0.7 * math.log(x2) + 0.1 * 2.0 / x2)
    assert np.allclose(xi, [x1, x2, x3], rtol=1e-15)


def test_init_unused_without_lags():
    th = ParamVector(0.5, 0.2, (), (), 0.0, 0.5)
    y = np.array([1.0, 2.0, 1.0])
    assert np.array_equal(quantile_path(y, th, init=1.0), quantile_path(y, th, init=2.0))


def test_explosive_path_raises():
    th = ParamVector(0.5, 5.0, (1.5,), (0.1,), 0.0, 0.5)
    y = np.ones(500)
    with pytest.raises(ExplosivePathError):
        quantile_path(y, th)
    assert loglik(y, th) == -np.inf


def test_path_positive(sim1000):
    theta, y = sim1000
    xi = quantile_path(y, theta)
    assert np.all(xi > 0) and np.all(np.isfinite(xi))


def test_loglik_single_term():
    th = ParamVector(0.7, 0.4, (0.0,), (0.0,), -1.3, 0.2)
    y = np.array([1.9])
    assert loglik(y, th) == pytest.approx(SkewQBS(0.7, math.exp(0.4), -1.3, 0.2).logpdf(1.9), rel=1e-14)


def test_bs_acd_nesting():
    th = ParamVector(0.6, 0.1, (0.8,), (0.07,), 0.0, 0.5)
    y = simulate(th, 400, 3)
    med, mean = float(np.median(y)), float(np.mean(y))
    ref = bs_acd_loglik(y, 0.6, 0.1, 0.8, 0.07, math.log(med), mean)
    assert loglik(y, th) == pytest.approx(ref, rel=1e-10)


def test_loglik_peaks_near_true_alpha(table_theta):
    y = simulate(table_theta, 5000, 17)
    base = loglik(y, table_theta)
    for a in (0.4, 0.6):
        assert loglik(y, table_theta.replace(alpha=a)) < base


def _random_points(rng, count):
    for _ in range(count):
        yield ParamVector(rng.uniform(0.3, 1.5), rng.uniform(-0.3, 0.4), (rng.uniform(0.2, 0.9),),
                          (rng.uniform(0.0, 0.2),), rng.uniform(-3, 3), rng.uniform(0.1, 0.9))


def _rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))


def test_score_matches_finite_differences(sim200):
    _, y = sim200
    rng = np.random.default_rng(0)
    for th in _random_points(rng, 5):
        f = lambda v: loglik(y, ParamVector.from_array(v, (1, 1), th.q))
        fd = central_diff(f, th.to_array(), 1e-6)
        assert _rel_err(score(y, th), fd) < 1e-5


def test_score_lambda_at_zero(sim200):
    _, y = sim200
    th = ParamVector(0.6, 0.2, (0.7,), (0.1,), 0.0, 0.3)
    h = 1e-6
    fd = (loglik(y, th.replace(lam=h)) - loglik(y, th.replace(lam=-h))) / (2 * h)
    assert score(y, th)[-1] == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_hessian_matches_finite_differences_and_is_symmetric(sim200):
    _, y = sim200
    rng = np.random.default_rng(1)
    for th in _random_points(rng, 5):
        g = lambda v: score(y, ParamVector.from_array(v, (1, 1), th.q))
        fd = central_diff(g, th.to_array(), 1e-6)
        H = hessian(y, th)
        assert _rel_err(H, 0.5 * (fd + fd.T)) < 1e-4
        assert np.max(np.abs(H - H.T)) <= 1e-8 * np.max(np.abs(H))


def test_higher_order_derivatives():
    th = ParamVector(0.8, 0.1, (0.5, 0.2), (0.05, 0.03), 0.7, 0.6)
    y = simulate(th, 300, 8)
    f = lambda v: loglik(y, ParamVector.from_array(v, (2, 2), 0.6))
    g = lambda v: score(y, ParamVector.from_array(v, (2, 2), 0.6))
    assert _rel_err(score(y, th), central_diff(f, th.to_array(), 1e-6)) < 1e-5
    assert _rel_err(hessian(y, th), central_diff(g, th.to_array(), 1e-6)) < 1e-4


def test_fixed_init_derivatives():
    th = ParamVector(0.8, 0.1, (0.6,), (0.1,), 0.7, 0.6)
    y = simulate(th, 200, 9)
    init = PathInit(xi=1.3)
    f = lambda v: loglik(y, ParamVector.from_array(v, (1, 1), 0.6), init)
    assert _rel_err(score(y, th, init), central_diff(f, th.to_array(), 1e-6)) < 1e-5


@pytest.fixture(scope="module")
def fit2000(table_theta):
    y = simulate(table_theta, 2000, 21)
    return y, fit_direct_ml(y, 0.5, (1, 1))


def test_mle_first_order_and_definiteness(fit2000):
    y, rep = fit2000
    th = rep.theta_hat
    assert np.linalg.norm(score(y, th)) < 1e-4 * y.size
    assert np.all(np.linalg.eigvalsh(hessian(y, th)) < 0)


def test_standard_errors(fit2000, table_theta):
    y, rep = fit2000
    se = observed_info_se(y, rep.theta_hat)
    assert np.all(np.isfinite(se)) and np.all(se > 0)
    covered = np.abs(rep.theta_hat.to_array() - table_theta.to_array()) <= 2 * se
    assert covered.sum() >= 3
    assert np.array_equal(se, observed_info_se(y.copy(), rep.theta_hat))


def test_standard_errors_shrink_with_n():
    # lambda is left out: its information is nearly singular at moderate n
    th = ParamVector(0.5, 0.2, (0.7,), (0.1,), -2.0, 0.5)
    ratios = []
    for seed in range(3):
        y = simulate(th, 2000, 100 + seed)
        se_small = fit_direct_ml(y[:500], 0.5, (1, 1)).se
        se_big = fit_direct_ml(y, 0.5, (1, 1)).se
        ratios.append(se_small[:4] / se_big[:4])
    assert np.all(np.abs(np.median(ratios, axis=0) - 2.0) <= 0.5)


def test_singular_information_reported():
    th = ParamVector(0.5, 0.2, (0.7,), (0.1,), -0.5, 0.5)
    y = simulate(th, 200, 4)
    with pytest.raises(SingularInformationError) as info:
        observed_info_se(y, th.replace(alpha=3.0, lam=20.0))
    assert info.value.condition_number > 0


def test_stationarity_examples():
    s = check_stationarity(ParamVector(0.5, 0.1, (0.7,), (0.1,), 0, 0.5))
    assert s.lambda_max == pytest.approx(0.7) and s.stationary
    s = check_stationarity(ParamVector(0.5, 0.1, (1.0,), (0.1,), 0, 0.5))
    assert s.lambda_max == pytest.approx(1.0) and not s.stationary
    s = check_stationarity(ParamVector(0.5, 0.1, (0.5, 0.3), (0.1,), 0, 0.5))
    assert s.lambda_max == pytest.approx(LAMBDA_MAX_R2, abs=1e-12)
    assert s.omega_matrix.shape == (2, 2)
    assert np.all(np.isfinite(s.phi_weights)) and np.all(np.isfinite(s.theta_weights))


def test_moment_static_case():
    th = ParamVector(0.5, 0.2, (), (), -0.5, 0.5)
    assert acd_moment(1, th) == pytest.approx(innovation_moment(1, th) * math.exp(0.2), rel=1e-12)


def test_moment_matches_long_simulation():
    th = ParamVector(0.5, 0.2, (0.7,), (0.05,), -0.5, 0.5)
    y = simulate(th, 1_000_000, 1, burn_in=1000)
    assert acd_moment(1, th) == pytest.approx(float(np.mean(y)), rel=0.02)


def test_moment_truncation_stable():
    th = ParamVector(0.5, 0.2, (0.8,), (0.05,), 1.0, 0.3)
    assert acd_moment(2, th, J=100) == pytest.approx(acd_moment(2, th, J=200), rel=1e-3)


def test_dispersion_inequality():
    for th in [ParamVector(0.5, 0.2, (0.7,), (0.05,), -0.5, 0.5),
               ParamVector(0.3, 0.0, (0.6,), (0.1,), 2.0, 0.2)]:
        d_y, d_rho = dispersion_index(th)
        assert d_y >= d_rho


def test_moment_non_existence():
    th = ParamVector(0.5, 0.2, (0.7,), (0.05,), -0.5, 0.5)
    with pytest.raises(MomentNotFiniteError):
        innovation_mgf(5.0, th)
    with pytest.raises(MomentNotFiniteError):
        acd_moment(1, th.replace(rho=(1.0,)))
