import math

import numpy as np
import pytest

from qbsacd import specfun as sf
from oracles import owens_t_quad, sn_cdf_quad

# frozen from a 30-digit mpmath evaluation (see the oracle notes)
MILLS_M8 = 8.1213681122361126807
MILLS_M40 = 40.024968847207263723
PHI_M23 = 0.010724110021675805392
PDF_35 = 0.0008726826950457600656
QSN_09_M05 = 0.83757580866932116277
QN_01234 = -1.1581569325527092227
SN_CDF_1_2 = 0.6844083720823747559
SN_CDF_M3_2 = 5.5966222878363664292e-13


def test_normal_pdf_values():
    assert sf.std_normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert sf.std_normal_pdf(1.0) == pytest.approx(0.2419707245, abs=1e-10)
    assert sf.std_normal_pdf(3.5) == pytest.approx(PDF_35, rel=1e-14)


def test_normal_cdf_values():
    assert sf.std_normal_cdf(0.0) == 0.5
    assert sf.std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    assert sf.std_normal_cdf(-2.3) == pytest.approx(PHI_M23, abs=1e-12)
    x = np.linspace(-8, 8, 33)
    assert np.allclose(sf.std_normal_cdf(-x), 1.0 - sf.std_normal_cdf(x), atol=1e-16)


def test_normal_quantile():
    assert sf.std_normal_quantile(0.5) == 0.0
    assert sf.std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-5)
    assert sf.std_normal_quantile(0.1234) == pytest.approx(QN_01234, abs=1e-12)
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            sf.std_normal_quantile(p)


def test_owens_t_special_values():
    assert sf.owens_t(0.0, 1.0) == pytest.approx(0.125, abs=1e-12)
    assert sf.owens_t(2.5, 0.0) == 0.0
    assert sf.owens_t(0.5, 1.0) == pytest.approx(owens_t_quad(0.5, 1.0), abs=1e-10)
    assert sf.owens_t(0.0, 3.0) == pytest.approx(math.atan(3.0) / (2 * math.pi), abs=1e-14)


@pytest.mark.parametrize("h,a", [(0.3, 0.7), (1.7, -2.2), (3.1, 4.5), (0.0, -1.0)])
def test_owens_t_symmetries_exact(h, a):
    assert sf.owens_t(-h, a) == sf.owens_t(h, a)
    assert sf.owens_t(h, -a) == -sf.owens_t(h, a)


def test_sn_pdf():
    assert sf.sn_pdf(0.0, 0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert sf.sn_pdf(0.0, 5.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert sf.sn_pdf(1.0, 2.0) == pytest.approx(2 * sf.std_normal_pdf(1.0) * sf.std_normal_cdf(2.0), rel=1e-15)


def test_sn_cdf_values():
    assert sf.sn_cdf(0.0, 1.0) == pytest.approx(0.25, abs=1e-15)
    for x in (-3.0, -0.4, 0.0, 2.2):
        assert sf.sn_cdf(x, 0.0) == sf.std_normal_cdf(x)
    assert sf.sn_cdf(1.0, 2.0) == pytest.approx(SN_CDF_1_2, abs=1e-10)
    assert sf.sn_cdf(1.0, 2.0) == pytest.approx(sn_cdf_quad(1.0, 2.0), abs=1e-10)


def test_sn_cdf_lower_tail_keeps_relative_accuracy():
    # Phi(x) - 2T(x, lam) cancels here; the value is ~5.6e-13
    assert sf.sn_cdf(-3.0, 2.0) == pytest.approx(SN_CDF_M3_2, rel=1e-9)
    assert sf.sn_cdf(-8.0, 3.0) > 0.0


def test_sn_reflection():
    for x in np.linspace(-6, 6, 25):
        for lam in (-7.0, -1.0, 0.3, 4.0):
            assert sf.sn_cdf(x, lam) + sf.sn_cdf(-x, -lam) == pytest.approx(1.0, abs=1e-12)


def test_sn_quantile():
    assert sf.sn_quantile(0.25, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert sf.sn_quantile(0.5, 0.0) == 0.0
    assert sf.sn_quantile(0.9, -0.5) == pytest.approx(QSN_09_M05, abs=1e-10)
    with pytest.raises(ValueError):
        sf.sn_quantile(1.0, 0.5)


def test_sn_quantile_inverts_cdf():
    checked = 0
    for x in np.linspace(-6, 6, 13):
        for lam in (-10.0, -2.0, 0.0, 0.5, 10.0):
            p = sf.sn_cdf(x, lam)
            # skip points where one ulp of p already moves x by more than 1e-9
            if not (1e-300 < p < 1.0) or np.spacing(p) / sf.sn_pdf(x, lam) > 1e-9:
                continue
            assert sf.sn_quantile(p, lam) == pytest.approx(x, abs=1e-8)
            checked += 1
    assert checked >= 45


def test_hn_quantile():
    assert sf.hn_quantile(0.5) == pytest.approx(0.6744898, abs=1e-7)
    assert sf.hn_quantile(math.erf(1 / math.sqrt(2))) == pytest.approx(1.0, abs=1e-12)
    assert sf.hn_quantile(0.95) == pytest.approx(1.9599640, abs=1e-7)
    for q in (0.05, 0.3, 0.77, 0.999):
        assert sf.hn_quantile(q) == pytest.approx(sf.std_normal_quantile((1 + q) / 2), abs=1e-12)
    with pytest.raises(ValueError):
        sf.hn_quantile(0.0)


def test_mills():
    assert sf.mills(0.0) == pytest.approx(0.7978845608, abs=1e-10)
    assert sf.mills(10.0) == pytest.approx(sf.std_normal_pdf(10.0), rel=1e-12)
    assert sf.mills(-8.0) == pytest.approx(MILLS_M8, rel=1e-8)
    assert sf.mills(-40.0) == pytest.approx(MILLS_M40, rel=1e-8)
    grid = np.linspace(-50, 30, 801)
    m = sf.mills(grid)
    assert np.all(m > 0.0) or np.all(m[grid < 30] > 0)
    assert np.all(np.diff(m) <= 0.0)
