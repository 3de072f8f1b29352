import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from qbsacd.dist import (EBS, SkewQBS, check_unimodality_hypothesis, eta,
                         truncated_bs_limit_pdf, u_given_y_pdf)
from qbsacd.specfun import hn_quantile, std_normal_cdf, std_normal_pdf
from oracles import bs_cdf, bs_pdf, bs_quantile

ETA_05_1_02 = 1.934748168063798092
A_REF = 0.36526741755612786764


def test_eta_values():
    assert eta(1.0, 0.0, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert eta(1.0, 0.0, std_normal_cdf(1.0)) == pytest.approx(1 + math.sqrt(5), abs=1e-12)
    assert eta(0.5, 1.0, 0.2) == pytest.approx(ETA_05_1_02, abs=1e-12)
    assert eta(3.0, -5.0, 0.01) > 0.0


def test_a_zero_points_and_reference():
    p = SkewQBS(0.8, 1.2, 0.6, 0.3)
    assert p.a(4 * 1.2 / p.eta ** 2) == pytest.approx(0.0, abs=1e-15)
    assert SkewQBS(0.7, 2.5, 0.0, 0.5).a(2.5) == pytest.approx(0.0, abs=1e-15)
    assert p.a(1.7) == pytest.approx(A_REF, abs=1e-12)
    with pytest.raises(ValueError):
        p.a(0.0)


def test_a_derivatives_by_finite_differences():
    p = SkewQBS(0.8, 1.2, 0.6, 0.3)
    y, h = 1.3, 1e-5
    assert p.a_prime(y) == pytest.approx((p.a(y + h) - p.a(y - h)) / (2 * h), rel=1e-6)
    assert p.a_dprime(y) == pytest.approx((p.a_prime(y + h) - p.a_prime(y - h)) / (2 * h), rel=1e-6)
    assert p.a_tprime(y) == pytest.approx((p.a_dprime(y + h) - p.a_dprime(y - h)) / (2 * h), rel=1e-6)


def test_a_derivative_signs():
    p = SkewQBS(1.1, 0.7, -2.0, 0.8)
    y = np.geomspace(1e-3, 1e3, 200)
    assert np.all(p.a_prime(y) > 0)
    assert np.all(p.a_dprime(y) < 0)
    assert np.all(p.a_tprime(y) > 0)


def test_pdf_reduces_to_bs():
    for alpha, xi in [(0.5, 1.0), (1.3, 4.2), (0.1, 0.3)]:
        y = np.geomspace(xi / 20, xi * 20, 97)
        p = SkewQBS(alpha, xi, 0.0, 0.5)
        ref = bs_pdf(y, alpha, xi)
        normal = ref > 1e-250  # subnormal results carry few significant bits
        assert np.allclose(p.pdf(y)[normal], ref[normal], rtol=1e-12, atol=0)
        assert np.allclose(p.cdf(y), bs_cdf(y, alpha, xi), rtol=1e-12, atol=1e-300)
        pr = np.linspace(0.05, 0.95, 19)
        assert np.allclose(p.quantile(pr), bs_quantile(pr, alpha, xi), rtol=1e-12)


def test_pdf_integrates_to_one():
    p = SkewQBS(0.5, 2.0, -0.5, 0.2)
    val, _ = integrate.quad(p.pdf, 0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_pdf_is_derivative_of_cdf():
    p = SkewQBS(1.5, 2.0, 3.0, 0.5)
    h = 1e-5
    assert p.pdf(1.1) == pytest.approx((p.cdf(1.1 + h) - p.cdf(1.1 - h)) / (2 * h), rel=1e-7)


def test_cdf_properties():
    p = SkewQBS(0.7, 1.3, 1.2, 0.35)
    assert p.cdf(1.3) == pytest.approx(0.35, abs=1e-14)
    q = SkewQBS(0.9, 1.4, 0.0, 0.3)
    for y in (0.2, 1.0, 3.3):
        assert q.cdf(y) == pytest.approx(std_normal_cdf(q.a(y)), abs=1e-15)
    val, _ = integrate.quad(p.pdf, 0, 2.4, epsabs=1e-13, epsrel=1e-12)
    assert p.cdf(2.4) == pytest.approx(val, abs=1e-8)
    y = np.geomspace(0.01, 100, 50)
    assert np.all(np.diff(p.cdf(y)) >= 0)


def test_quantile_identities():
    for args in [(0.5, 1.0, -1.0, 0.2), (2.0, 0.3, 4.0, 0.9), (0.2, 7.0, 0.0, 0.5)]:
        p = SkewQBS(*args)
        assert p.quantile(p.q) == pytest.approx(p.xi, rel=1e-12)
    p = SkewQBS(0.5, 1.0, -1.0, 0.2)
    y08 = p.quantile(0.8)
    root = optimize.bisect(lambda y: p.cdf(y) - 0.8, 1e-3, 100.0, xtol=1e-14)
    assert y08 == pytest.approx(root, rel=1e-10)
    with pytest.raises(ValueError):
        p.quantile(1.0)


def test_sampler():
    p = SkewQBS(0.6, 2.0, 0.0, 0.5)
    draws = p.sample(100_000, np.random.default_rng(1))
    assert abs(np.median(draws) / 2.0 - 1.0) < 0.015
    p2 = SkewQBS(0.8, 1.5, 1.5, 0.2)
    n = 100_000
    frac = np.mean(p2.sample(n, np.random.default_rng(2)) <= 1.5)
    assert abs(frac - 0.2) < 3 * math.sqrt(0.2 * 0.8 / n)
    a = p2.sample(50, np.random.default_rng(9))
    b = p2.sample(50, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_sampler_ks():
    p = SkewQBS(0.8, 1.5, -2.0, 0.7)
    d = p.sample(100_000, np.random.default_rng(3))
    assert stats.kstest(d, p.cdf).pvalue > 0.01


def test_ebs():
    p = SkewQBS(0.9, 1.0, 0.0, 0.4)
    e = EBS.given_u(p, 1.3)
    y = np.geomspace(0.05, 20, 40)
    assert e.lam_h == 0.0 and e.alpha_delta == pytest.approx(0.9)
    assert np.allclose(e.pdf(y), bs_pdf(y, 0.9, float(p.beta)), rtol=1e-12)
    e2 = EBS(0.9, 1.0, 0.7)
    val, _ = integrate.quad(e2.pdf, 0, np.inf, epsabs=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_mixture_identity():
    p = SkewQBS(0.7, 1.4, -1.5, 0.3)
    for y in (0.4, 1.0, 2.7):
        val, _ = integrate.quad(lambda u: EBS.given_u(p, u).pdf(y) * 2 * std_normal_pdf(u),
                                0, np.inf, epsabs=1e-13, epsrel=1e-11)
        assert val == pytest.approx(p.pdf(y), abs=1e-8)


def test_u_given_y():
    p0 = SkewQBS(0.5, 1.0, 0.0, 0.5)
    for u in (0.0, 0.5, 2.0):
        assert u_given_y_pdf(u, 1.5, p0) == pytest.approx(2 * std_normal_pdf(u), rel=1e-14)
    p = SkewQBS(0.5, 1.0, 2.0, 0.5)
    val, _ = integrate.quad(lambda u: u_given_y_pdf(u, 1.5, p), 0, np.inf, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        u_given_y_pdf(-0.1, 1.5, p)


def test_mode_bs_grid():
    p = SkewQBS(0.8, 1.0, 0.0, 0.5)
    grid = np.linspace(0.05, 2.0, 400_001)
    assert p.mode() == pytest.approx(grid[np.argmax(bs_pdf(grid, 0.8, 1.0))], abs=1e-5)


@pytest.mark.parametrize("args", [(0.5, 1.0, -0.5, 0.5), (1.4, 2.0, 3.0, 0.2), (0.3, 0.5, 10.0, 0.9)])
def test_mode_is_a_local_maximum(args):
    p = SkewQBS(*args)
    m = p.mode()
    eps = 1e-4 * m
    assert p.pdf(m) >= p.pdf(m - eps) and p.pdf(m) >= p.pdf(m + eps)
    h = 1e-6 * m
    slope = (p.pdf(m + h) - p.pdf(m - h)) / (2 * h)
    assert abs(slope) * m < 1e-6 * p.pdf(m)


def test_survival_and_hazard():
    p = SkewQBS(0.7, 1.3, 1.2, 0.35)
    assert p.survival(1.3) == pytest.approx(0.65, abs=1e-14)
    y = np.geomspace(0.05, 30, 60)
    assert np.allclose(p.hazard(y) * p.survival(y), p.pdf(y), rtol=1e-12)
    assert p.hazard(1e6) == np.inf


def test_unimodality_domain():
    with pytest.raises(ValueError):
        check_unimodality_hypothesis(SkewQBS(0.5, 1.0, -1.0, 0.5))
    with pytest.raises(ValueError):
        check_unimodality_hypothesis(SkewQBS(0.5, 1.0, 0.0, 0.5))


def _slope_sign_changes(p):
    y = np.geomspace(p.quantile(1e-6), p.quantile(1 - 1e-6), 20_001)
    g = np.diff(p.pdf(y))
    g = g[g != 0]
    return int(np.sum(np.sign(g[1:]) != np.sign(g[:-1])))


def test_unimodality_cubic_and_grid():
    p = SkewQBS(0.5, 1.0, 0.5, 0.5)
    rep = check_unimodality_hypothesis(p)
    b, y0 = float(p.beta), rep.y_bs
    cubic = 0.25 * y0 ** 3 + b * (2 * 0.25 + 0.25) * y0 ** 2 + b * b * (3 - 0.25) * y0 - 0.25 * b ** 3
    assert rep.cubic_value == pytest.approx(cubic, rel=1e-12)
    assert rep.cubic_positive
    assert _slope_sign_changes(p) == 1
    # the third-derivative requirement fails: f''' turns positive in the right tail
    assert not rep.third_derivative_nonpositive and not rep.holds


def test_bs_limit_is_unimodal():
    assert _slope_sign_changes(SkewQBS(0.9, 1.0, 1e-9, 0.5)) == 1


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_scale_closure(c):
    p, pc = SkewQBS(0.6, 1.7, -1.2, 0.3), SkewQBS(0.6, 1.7 * c, -1.2, 0.3)
    y = np.geomspace(0.05, 20, 50)
    assert np.allclose(p.pdf(y), c * pc.pdf(c * y), rtol=1e-12)


def test_reciprocal_closure():
    p, r = SkewQBS(0.6, 1.7, -1.2, 0.3), SkewQBS(0.6, 1 / 1.7, 1.2, 0.7)
    y = np.geomspace(0.05, 20, 50)
    assert np.allclose(p.cdf(y), 1.0 - r.cdf(1.0 / y), atol=1e-8)


def test_truncated_limit():
    alpha, q = 0.5, 0.4
    theta = hn_quantile(q)
    s = alpha * theta
    xi = theta * (s + math.sqrt(s * s + 4)) ** 2 / 4
    p = SkewQBS(alpha, xi, 1e3, q)
    above = np.linspace(theta * 1.01, theta * 6, 200)
    ref = truncated_bs_limit_pdf(above, alpha, xi, q)
    assert np.allclose(ref, 2 * bs_pdf(above, alpha, theta), rtol=1e-12)
    assert np.all(np.abs(p.pdf(above) / ref - 1) < 0.02)
    below = np.linspace(theta * 0.2, theta * 0.9, 100)
    assert np.all(p.pdf(below) < 1e-3 * np.max(p.pdf(above)))


def test_invalid_parameters_rejected_at_construction():
    for bad in [(0.0, 1, 0, 0.5), (1, -1, 0, 0.5), (1, 1, np.nan, 0.5), (1, 1, 0, 1.0)]:
        with pytest.raises(ValueError):
            SkewQBS(*bad)
