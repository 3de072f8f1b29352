"""Skewed Birnbaum-Saunders law in its quantile parameterization.

``SkewQBS(alpha, xi, lam, q)`` is the skew-BS distribution whose
100q-th percentile equals ``xi``.  It is obtained from the classic
skew-BS(alpha, beta, lam) by setting ``beta = 4 xi / eta**2`` with

    eta = alpha * Q_X(q; lam) + sqrt((alpha * Q_X(q; lam))**2 + 4),

``Q_X`` being the skew-normal quantile.  ``xi`` may be an array, which is
how the ACD layer evaluates a whole series of conditional quantiles at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .specfun import hn_quantile, mills, sn_cdf, sn_quantile, sn_sf, std_normal_pdf

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_PI = 1.0 / math.pi


def _as_float(y):
    return np.asarray(y, dtype=float)


def _scalarize(out):
    return float(out) if np.ndim(out) == 0 else out


def eta(alpha, lam, q):
    """The scale factor ``eta_{alpha;lam}``; strictly positive."""
    s = alpha * sn_quantile(q, lam)
    return s + math.sqrt(s * s + 4.0)


def sn_quantile_derivs(q, lam):
    """``Q_X(q; lam)`` and its first two derivatives in ``lam``.

    Implicit differentiation of ``F_SN(Q; lam) = q`` using
    ``dF/dlam = -exp(-x^2 (1+lam^2)/2) / (pi (1+lam^2))``.
    """
    x = sn_quantile(q, lam)
    g = 1.0 + lam * lam
    e = math.exp(-0.5 * x * x * g)
    f = 2.0 * std_normal_pdf(x) * float(special.ndtr(lam * x))
    f_x = 2.0 * std_normal_pdf(x) * (-x * float(special.ndtr(lam * x)) + lam * std_normal_pdf(lam * x))
    f_lam = x * e * _INV_PI
    F_lam = -e * _INV_PI / g
    F_lamlam = lam * e * (x * x * g + 2.0) * _INV_PI / (g * g)
    F_lamx = f_lam
    d1 = -F_lam / f
    d2 = -((F_lamx * d1 + F_lamlam) * f - F_lam * (f_x * d1 + f_lam)) / (f * f)
    return x, d1, d2


def log_eta_derivs(alpha, lam, q):
    """``log eta`` with its gradient and Hessian in ``(alpha, lam)``.

    Uses ``log eta = log 2 + asinh(alpha Q / 2)``.  Returns
    ``(L, L_a, L_l, L_aa, L_al, L_ll)``.
    """
    Q, Q1, Q2 = sn_quantile_derivs(q, lam)
    s = alpha * Q
    r = s * s + 4.0
    d1 = 1.0 / math.sqrt(r)
    d2 = -s / r ** 1.5
    s_a, s_l = Q, alpha * Q1
    s_al, s_ll = Q1, alpha * Q2
    L = math.log(2.0) + math.asinh(0.5 * s)
    return (L,
            d1 * s_a,
            d1 * s_l,
            d2 * s_a * s_a,
            d2 * s_a * s_l + d1 * s_al,
            d2 * s_l * s_l + d1 * s_ll)


@dataclass(frozen=True)
class SkewQBS:
    """skew-QBS(alpha, xi, lam) at fixed quantile level ``q``.

    Parameters are validated here, once; evaluation methods assume them valid.
    """

    alpha: float
    xi: float | np.ndarray
    lam: float
    q: float
    _eta: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        xi = np.asarray(self.xi, dtype=float)
        if not (np.all(np.isfinite(xi)) and np.all(xi > 0.0)):
            raise ValueError("xi must be positive and finite")
        if not np.isfinite(self.lam):
            raise ValueError(f"lam must be finite, got {self.lam!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")
        object.__setattr__(self, "_eta", eta(self.alpha, self.lam, self.q))

    @property
    def delta(self):
        return self.lam / math.sqrt(1.0 + self.lam * self.lam)

    @property
    def eta(self):
        return self._eta

    @property
    def beta(self):
        """Scale of the underlying skew-BS(alpha, beta, lam)."""
        return 4.0 * np.asarray(self.xi, dtype=float) / self._eta ** 2

    def _roots(self, y):
        y = _as_float(y)
        if np.any(y <= 0.0):
            raise ValueError("y must be strictly positive")
        u = np.sqrt(y / self.beta)
        return y, u, 1.0 / u

    def a(self, y):
        _, u, v = self._roots(y)
        return _scalarize((u - v) / self.alpha)

    def a_prime(self, y):
        y, u, v = self._roots(y)
        return _scalarize((u + v) / (2.0 * self.alpha * y))

    def a_dprime(self, y):
        y, u, v = self._roots(y)
        return _scalarize(-(u + 3.0 * v) / (4.0 * self.alpha * y * y))

    def a_tprime(self, y):
        y, u, v = self._roots(y)
        return _scalarize(3.0 * (u + 5.0 * v) / (8.0 * self.alpha * y ** 3))

    def logpdf(self, y):
        y, u, v = self._roots(y)
        a = (u - v) / self.alpha
        ap = (u + v) / (2.0 * self.alpha * y)
        out = math.log(2.0) - _LOG_SQRT_2PI - 0.5 * a * a + special.log_ndtr(self.lam * a) + np.log(ap)
        return _scalarize(out)

    def pdf(self, y):
        return _scalarize(np.exp(self.logpdf(y)))

    def cdf(self, y):
        return _scalarize(sn_cdf(self.a(y), self.lam))

    def survival(self, y):
        return _scalarize(sn_sf(self.a(y), self.lam))

    def hazard(self, y):
        """``pdf / survival``; ``+inf`` once the survival drops below 1e-300."""
        s = np.asarray(self.survival(y), dtype=float)
        f = np.asarray(self.pdf(y), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(s < 1e-300, np.inf, f / np.maximum(s, 1e-300))
        return _scalarize(out)

    def quantile(self, pr):
        pr_arr = np.atleast_1d(_as_float(pr))
        if np.any((pr_arr <= 0.0) | (pr_arr >= 1.0)):
            raise ValueError("probability must lie in (0, 1)")
        xq = np.array([sn_quantile(float(p), self.lam) for p in pr_arr])
        s = self.alpha * xq
        out = np.multiply.outer(np.asarray(self.xi, dtype=float) / self._eta ** 2,
                                (s + np.sqrt(s * s + 4.0)) ** 2)
        out = out.reshape(np.shape(self.xi) + np.shape(pr))
        return _scalarize(out)

    def sample(self, n, rng):
        """Draw ``n`` variates through the skew-normal stochastic representation."""
        if n < 1:
            raise ValueError("n must be at least 1")
        d = self.delta
        u = np.abs(rng.standard_normal(n))
        z = rng.standard_normal(n)
        x = d * u + math.sqrt(1.0 - d * d) * z
        s = self.alpha * x
        return np.asarray(self.xi, dtype=float) / self._eta ** 2 * (s + np.sqrt(s * s + 4.0)) ** 2

    def dlogpdf(self, y):
        """Derivative of the log density in ``y``."""
        y, u, v = self._roots(y)
        al = self.alpha
        a = (u - v) / al
        a1 = (u + v) / (2.0 * al * y)
        a2 = -(u + 3.0 * v) / (4.0 * al * y * y)
        return _scalarize(-a * a1 + self.lam * mills(self.lam * a) * a1 + a2 / a1)

    def mode(self):
        """A root of the first-order condition at which the density peaks.

        The search starts on ``[quantile(0.01), quantile(0.99)]`` and widens
        to ``[quantile(1e-8), quantile(1 - 1e-8)]`` if no sign change is found.
        """
        for lo_p, hi_p in ((0.01, 0.99), (1e-8, 1.0 - 1e-8)):
            lo, hi = self.quantile(lo_p), self.quantile(hi_p)
            grid = np.geomspace(lo, hi, 257)
            g = self.dlogpdf(grid)
            idx = np.flatnonzero((g[:-1] > 0.0) & (g[1:] <= 0.0))
            if idx.size:
                cands = [optimize.brentq(self.dlogpdf, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-12)
                         for i in idx]
                return max(cands, key=self.pdf)
        raise RuntimeError("mode search found no sign change of the density slope")


@dataclass(frozen=True)
class EBS:
    """Extended BS law of ``Y | U = u``.

    ``eta`` is carried from the parent skew-QBS law so ``a`` and ``a'`` are
    the same functions of ``y``; ``eta = 2`` makes ``xi`` the BS scale.
    """

    alpha_delta: float
    xi: float
    lam_h: float
    eta: float = 2.0

    def __post_init__(self):
        if not self.alpha_delta > 0.0:
            raise ValueError("alpha_delta must be positive")
        if not self.xi > 0.0:
            raise ValueError("xi must be positive")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")

    @classmethod
    def given_u(cls, p: SkewQBS, u):
        d = p.delta
        c = math.sqrt(1.0 - d * d)
        return cls(p.alpha * c, float(p.xi), -d * u / c, p.eta)

    def pdf(self, y):
        y = _as_float(y)
        if np.any(y <= 0.0):
            raise ValueError("y must be strictly positive")
        beta = 4.0 * self.xi / self.eta ** 2
        u = np.sqrt(y / beta)
        a = (u - 1.0 / u) / self.alpha_delta
        ap = (u + 1.0 / u) / (2.0 * self.alpha_delta * y)
        return _scalarize(std_normal_pdf(self.lam_h + a) * ap)


def u_given_y_pdf(u, y, p: SkewQBS):
    """Density of the half-normal latent ``U`` given ``Y = y``."""
    u = _as_float(u)
    if np.any(u < 0.0):
        raise ValueError("u must be nonnegative")
    a = p.a(y)
    d = p.delta
    s = math.sqrt(1.0 - d * d)
    num = std_normal_pdf((u - d * a) / s) / s
    return _scalarize(num / special.ndtr(p.lam * a))


@dataclass(frozen=True)
class UnimodalityReport:
    """Outcome of :func:`check_unimodality_hypothesis`.

    ``cubic_value`` is the polynomial exactly as printed with the paper's
    coefficients; ``curvature_value`` is ``a'' - lam^2 a a'^2`` at ``y_bs``
    computed directly.  ``holds`` requires the curvature to be negative and
    the third derivative to be nonpositive on the whole grid.
    """

    y_bs: float
    cubic_value: float
    cubic_positive: bool
    curvature_value: float
    curvature_negative: bool
    max_third_derivative: float
    third_derivative_nonpositive: bool
    holds: bool


def _third_derivative(f, y, h):
    return (-f(y + 3 * h) + 8 * f(y + 2 * h) - 13 * f(y + h)
            + 13 * f(y - h) - 8 * f(y - 2 * h) + f(y - 3 * h)) / (8.0 * h ** 3)


def check_unimodality_hypothesis(p: SkewQBS, grid_size=512):
    """Evaluate the sufficient conditions for unimodality when ``lam > 0``.

    ``y_bs`` is the mode of the symmetric part ``phi(a) a'`` (the BS law with
    the same ``a``); the cubic uses that law's scale ``beta = 4 xi / eta^2``.
    The third derivative of the density is taken by sixth-point central
    differences with step ``1e-4 y`` on a log grid up to ``quantile(0.9999)``.
    """
    if not p.lam > 0.0:
        raise ValueError("the unimodality hypothesis is stated for lam > 0 only")
    # eta = 2 at (lam=0, q=0.5), so xi there is the BS scale itself
    sym = SkewQBS(p.alpha, float(p.beta), 0.0, 0.5)
    y_bs = sym.mode()
    lam2, al, b = p.lam ** 2, p.alpha, float(p.beta)
    cubic = lam2 * y_bs ** 3 + b * (2 * al * al + lam2) * y_bs ** 2 + b * b * (3 - lam2) * y_bs - lam2 * b ** 3
    a, a1, a2 = p.a(y_bs), p.a_prime(y_bs), p.a_dprime(y_bs)
    curv = a2 - lam2 * a * a1 * a1
    grid = np.geomspace(y_bs, p.quantile(0.9999), grid_size)
    f3 = _third_derivative(p.pdf, grid, 1e-4 * grid)
    # finite-difference noise floor relative to the largest third derivative
    tol = 1e-6 * np.max(np.abs(f3))
    f3max = float(np.max(f3))
    third_ok = bool(f3max <= tol)
    return UnimodalityReport(float(y_bs), float(cubic), bool(cubic > 0.0), float(curv),
                             bool(curv < 0.0), f3max, third_ok, bool(curv < 0.0 and third_ok))


def truncated_bs_limit_pdf(y, alpha, xi, q):
    """Limit of the skew-QBS density as ``lam -> inf``.

    The skew-normal base tends to the half-normal, so ``Q_X(q)`` tends to
    ``Theta_q = hn_quantile(q)`` and the law tends to BS(alpha, beta_inf)
    truncated to ``[beta_inf, inf)`` with ``beta_inf = 4 xi / eta_inf^2``.
    Choosing ``xi = Theta_q * eta_inf^2 / 4`` gives truncation at ``Theta_q``.
    """
    s = alpha * hn_quantile(q)
    beta = 4.0 * xi / (s + math.sqrt(s * s + 4.0)) ** 2
    y = _as_float(y)
    u = np.sqrt(y / beta)
    a = (u - 1.0 / u) / alpha
    ap = (u + 1.0 / u) / (2.0 * alpha * y)
    return _scalarize(np.where(y >= beta, 2.0 * std_normal_pdf(a) * ap, 0.0))
