"""The skew-QBS-ACD(r, s, q) model: quantile recursion, likelihood and derivatives.

The conditional 100q-th percentile of each duration follows

    log xi_t = varpi + sum_j rho_j log xi_{t-j} + sum_j sigma_j y_{t-j} / xi_{t-j}

and ``y_t | past ~ SkewQBS(alpha, xi_t, lam, q)``.

Pre-sample values
-----------------
Unless an explicit ``init`` is given, pre-sample ``xi`` is
``median(y) * eta**2 / 4``: the sample median placed on the BS-scale and
mapped to level ``q``.  With this choice a fit at level ``q`` and a fit at
level ``q'`` are exact reparameterizations of each other, and the
pre-sample value moves with ``(alpha, lam)`` through ``eta``; the score and
Hessian include that dependence.  Pre-sample durations equal ``mean(y)``.
An explicit numeric ``init`` is treated as a constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import _kernels
from .dist import SkewQBS, log_eta_derivs
from .specfun import mills

_LOG_2 = math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ExplosivePathError(OverflowError):
    """The conditional-quantile recursion left the representable range."""


class MomentNotFiniteError(ArithmeticError):
    """A moment or moment-generating factor of the innovation does not exist."""


@dataclass(frozen=True)
class ParamVector:
    """``theta = (alpha, varpi, rho_1..r, sigma_1..s, lam)`` at level ``q``."""

    alpha: float
    varpi: float
    rho: tuple = ()
    sigma: tuple = ()
    lam: float = 0.0
    q: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(float(v) for v in np.atleast_1d(self.rho)))
        object.__setattr__(self, "sigma", tuple(float(v) for v in np.atleast_1d(self.sigma)))
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")
        if not all(np.isfinite(v) for v in (self.varpi, self.lam, *self.rho, *self.sigma)):
            raise ValueError("parameters must be finite")

    @property
    def order(self):
        return len(self.rho), len(self.sigma)

    @property
    def dim(self):
        return len(self.rho) + len(self.sigma) + 3

    @property
    def names(self):
        r, s = self.order
        return (["alpha", "varpi"] + [f"rho{j}" for j in range(1, r + 1)]
                + [f"sigma{j}" for j in range(1, s + 1)] + ["lambda"])

    def to_array(self):
        return np.array([self.alpha, self.varpi, *self.rho, *self.sigma, self.lam])

    @classmethod
    def from_array(cls, vec, order, q):
        r, s = order
        vec = np.asarray(vec, dtype=float)
        return cls(vec[0], vec[1], tuple(vec[2:2 + r]), tuple(vec[2 + r:2 + r + s]), vec[2 + r + s], q)

    def replace(self, **kw):
        d = dict(alpha=self.alpha, varpi=self.varpi, rho=self.rho, sigma=self.sigma,
                 lam=self.lam, q=self.q)
        d.update(kw)
        return ParamVector(**d)

    def distribution(self, xi):
        return SkewQBS(self.alpha, xi, self.lam, self.q)


def as_series(y):
    """Validate a duration series: 1-D, finite, strictly positive, nonempty."""
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.size < 1:
        raise ValueError("durations must be a nonempty 1-D array")
    if not np.all(np.isfinite(y)) or np.any(y <= 0.0):
        raise ValueError("durations must be finite and strictly positive")
    return y


@dataclass(frozen=True)
class PathInit:
    """Pre-sample settings for the recursion.

    ``level`` is the BS-scale anchor (default ``median(y)``); ``xi`` fixes the
    pre-sample quantile directly and disables its dependence on the shape
    parameters; ``y0`` is the pre-sample duration (default ``mean(y)``).
    """

    level: float | None = None
    xi: float | None = None
    y0: float | None = None

    def resolve(self, y, theta):
        """Return ``(psi0, y0, moves)``; ``moves`` says whether psi0 depends on eta."""
        y0 = float(np.mean(y)) if self.y0 is None else float(self.y0)
        if self.xi is not None:
            if not self.xi > 0.0:
                raise ValueError("init must be positive")
            return math.log(self.xi), y0, False
        level = float(np.median(y)) if self.level is None else float(self.level)
        L = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
        return math.log(level) + 2.0 * L - math.log(4.0), y0, True


def _init(init):
    if init is None:
        return PathInit()
    if isinstance(init, PathInit):
        return init
    return PathInit(xi=float(init), y0=float(init))


def _psi(y, theta, init):
    psi0, y0, moves = _init(init).resolve(y, theta)
    psi, ok = _kernels.psi_path(y, float(theta.varpi), np.array(theta.rho, dtype=float),
                                np.array(theta.sigma, dtype=float), psi0, y0)
    if not ok:
        raise ExplosivePathError("conditional quantile recursion exceeded 1e300 (explosive parameters)")
    return psi, psi0, y0, moves


def quantile_path(y, theta: ParamVector, init=None):
    """Conditional quantiles ``xi_t`` for ``t = 1..n``.

    ``init`` may be ``None`` (default pre-sample rule), a positive number
    (pre-sample quantile and pre-sample duration both fixed at that value)
    or a :class:`PathInit`.
    """
    y = as_series(y)
    psi, *_ = _psi(y, theta, init)
    return np.exp(psi)


def _logf_terms(y, psi, theta, L):
    """Per-observation log density and the intermediate quantities."""
    w = L - 0.5 * psi + 0.5 * np.log(y) - _LOG_2
    al = theta.alpha
    a = 2.0 * np.sinh(w) / al
    logf = (_LOG_2 - _LOG_SQRT_2PI - 0.5 * a * a + special.log_ndtr(theta.lam * a)
            - math.log(al) - np.log(y) + np.logaddexp(w, -w) - _LOG_2)
    return logf, w, a


def loglik(y, theta: ParamVector, init=None, pointwise=False):
    """Observed-data log-likelihood.

    Returns ``-inf`` when the recursion explodes or a density underflows.
    """
    y = as_series(y)
    try:
        psi, *_ = _psi(y, theta, init)
    except ExplosivePathError:
        return -np.inf
    L = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
    logf, _, _ = _logf_terms(y, psi, theta, L)
    if pointwise:
        return logf
    total = float(np.sum(logf))
    return total if np.isfinite(total) else -np.inf


def _g_partials(w, a, theta):
    """Partials of ``log f`` in its direct arguments ``(alpha, lam, w)``.

    Returns first partials ``(g_a, g_l, g_w)`` and the second-order ones
    ``(g_aa, g_al, g_aw, g_ll, g_lw, g_ww)``, each an array over ``t``.
    """
    al, lam = theta.alpha, theta.lam
    u = lam * a
    m = mills(u)
    m1 = -m * (u + m)
    a_w = 2.0 * np.cosh(w) / al
    a_a = -a / al
    a_aa = 2.0 * a / al ** 2
    a_aw = -a_w / al
    a_ww = a
    th = np.tanh(w)

    g_a = -1.0 / al - a * a_a + m * lam * a_a
    g_l = m * a
    g_w = th - a * a_w + m * lam * a_w

    g_aa = 1.0 / al ** 2 - a_a * a_a - a * a_aa + m1 * (lam * a_a) ** 2 + m * lam * a_aa
    g_al = m1 * (lam * a_a) * a + m * a_a
    g_aw = -a_a * a_w - a * a_aw + m1 * (lam * a_a) * (lam * a_w) + m * lam * a_aw
    g_ll = m1 * a * a
    g_lw = m1 * a * (lam * a_w) + m * a_w
    g_ww = 1.0 - th * th - a_w * a_w - a * a_ww + m1 * (lam * a_w) ** 2 + m * lam * a_ww
    return (g_a, g_l, g_w), (g_aa, g_al, g_aw, g_ll, g_lw, g_ww)


def _w_derivatives(y, theta, init, second):
    """``w_t`` and its derivatives in ``theta``, plus the per-t log density."""
    psi, psi0, y0, moves = _psi(y, theta, init)
    r, s = theta.order
    k = theta.dim
    L, L_a, L_l, L_aa, L_al, L_ll = log_eta_derivs(theta.alpha, theta.lam, theta.q)
    D, H = _kernels.psi_derivatives(y, psi, np.array(theta.rho, dtype=float),
                                    np.array(theta.sigma, dtype=float), psi0, y0, second)
    n = y.size
    m = r + s + 2
    # Jacobian of the recursion inputs (varpi, rho, sigma, psi0) w.r.t. theta
    J = np.zeros((m, k))
    J[:m - 1, 1:k - 1] = np.eye(m - 1)
    Lg = np.array([L_a] + [0.0] * (k - 2) + [L_l])
    if moves:
        J[m - 1] = 2.0 * Lg
    psi_1 = D @ J
    w_1 = Lg[None, :] - 0.5 * psi_1
    w_2 = None
    if second:
        Lh = np.zeros((k, k))
        Lh[0, 0], Lh[0, k - 1], Lh[k - 1, 0], Lh[k - 1, k - 1] = L_aa, L_al, L_al, L_ll
        psi_2 = np.einsum("tab,ai,bj->tij", H, J, J, optimize=True)
        if moves:
            psi_2 += D[:, m - 1, None, None] * (2.0 * Lh)[None]
        w_2 = Lh[None] - 0.5 * psi_2
    logf, w, a = _logf_terms(y, psi, theta, L)
    return logf, w, a, w_1, w_2


def score(y, theta: ParamVector, init=None):
    """Analytic gradient of :func:`loglik` in ``theta.to_array()`` order."""
    y = as_series(y)
    logf, w, a, w_1, _ = _w_derivatives(y, theta, init, second=False)
    (g_a, g_l, g_w), _ = _g_partials(w, a, theta)
    grad = g_w @ w_1
    grad[0] += np.sum(g_a)
    grad[-1] += np.sum(g_l)
    return grad


def hessian(y, theta: ParamVector, init=None):
    """Analytic Hessian of :func:`loglik`, symmetrized."""
    y = as_series(y)
    k = theta.dim
    logf, w, a, w_1, w_2 = _w_derivatives(y, theta, init, second=True)
    (g_a, g_l, g_w), (g_aa, g_al, g_aw, g_ll, g_lw, g_ww) = _g_partials(w, a, theta)
    # direct dependence on (alpha, lam) placed into the full index space
    g_dw = np.zeros((y.size, k))
    g_dw[:, 0] = g_aw
    g_dw[:, -1] = g_lw
    Hs = np.einsum("ti,tj->ij", g_dw, w_1)
    Hs = Hs + Hs.T
    Hs += np.einsum("t,ti,tj->ij", g_ww, w_1, w_1)
    Hs += np.einsum("t,tij->ij", g_w, w_2)
    Hs[0, 0] += np.sum(g_aa)
    Hs[0, -1] += np.sum(g_al)
    Hs[-1, 0] += np.sum(g_al)
    Hs[-1, -1] += np.sum(g_ll)
    return 0.5 * (Hs + Hs.T)


class SingularInformationError(np.linalg.LinAlgError):
    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


def observed_info_se(y, theta_hat: ParamVector, init=None, return_cov=False):
    """Standard errors from the inverse observed information ``(-H)^-1``."""
    info = -hessian(y, theta_hat, init)
    cond = float(np.linalg.cond(info))
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError(
            f"observed information is not positive definite (condition number {cond:.3g})", cond
        ) from None
    inv_chol = np.linalg.inv(chol)
    cov = inv_chol.T @ inv_chol
    se = np.sqrt(np.diag(cov))
    return (se, cov) if return_cov else se


@dataclass(frozen=True)
class StationaritySpec:
    """Companion matrix of the log-quantile autoregression and its MA weights."""

    omega_matrix: np.ndarray
    lambda_max: float
    phi_weights: np.ndarray = field(repr=False)
    theta_weights: np.ndarray = field(repr=False)

    @property
    def stationary(self):
        return self.lambda_max < 1.0


def ma_weights(rho, sigma, J):
    """``phi_0..phi_J`` of ``1/(1 - rho(L))`` and ``theta_1..theta_J`` of ``sigma(L)/(1 - rho(L))``."""
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    phi = np.zeros(J + 1)
    phi[0] = 1.0
    for k in range(1, J + 1):
        lags = min(k, rho.size)
        phi[k] = np.dot(rho[:lags], phi[k - 1::-1][:lags])
    theta = np.zeros(J)
    for l in range(1, J + 1):
        lags = min(l, sigma.size)
        theta[l - 1] = np.dot(sigma[:lags], phi[l - 1::-1][:lags])
    return phi, theta


def check_stationarity(theta: ParamVector, J=200):
    r, s = theta.order
    p = max(r, s, 1)
    rho = np.zeros(p)
    rho[:r] = theta.rho
    omega = np.zeros((p, p))
    omega[0] = rho
    omega[1:, :-1] = np.eye(p - 1)
    lam_max = float(np.max(np.abs(np.linalg.eigvals(omega))))
    phi, th = ma_weights(theta.rho, theta.sigma, J)
    return StationaritySpec(omega, lam_max, phi, th)


def _innovation(theta):
    return SkewQBS(theta.alpha, 1.0, theta.lam, theta.q)


def _expect(fn, dist):
    """``E[fn(rho)]`` for the unit-quantile innovation, by quadrature split at its quantiles."""
    cuts = [0.0] + list(dist.quantile(np.array([1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 0.999999]))) + [np.inf]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, err = integrate.quad(lambda v: fn(v) * dist.pdf(v) if v > 0 else 0.0, lo, hi,
                                  epsabs=1e-14, epsrel=1e-12, limit=200)
        if not np.isfinite(val):
            raise MomentNotFiniteError("quadrature diverged")
        total += val
    return total


def innovation_mgf(t, theta: ParamVector):
    """``E[exp(t rho)]`` for ``rho ~ SkewQBS(alpha, 1, lam, q)``.

    Raises :class:`MomentNotFiniteError` when the integrand is still growing
    at the innovation's 0.99999 quantile.
    """
    dist = _innovation(theta)
    y_tail = dist.quantile(0.99999)
    if t > 0 and t + dist.dlogpdf(y_tail) >= 0.0:
        raise MomentNotFiniteError(f"E[exp({t:.4g} rho)] does not exist for this innovation law")
    return _expect(lambda v: math.exp(t * v), dist)


def innovation_moment(m, theta: ParamVector):
    """``E[rho^m]`` of the unit-quantile innovation."""
    return _expect(lambda v: v ** m, _innovation(theta))


def acd_moment(m, theta: ParamVector, J=200, tol=1e-12):
    """Stationary ``E[Y_t^m]`` through the MA(infinity) form of the log-quantile.

    The infinite product is truncated at ``J`` factors, or earlier once a
    log-factor falls below ``tol``.
    """
    spec = check_stationarity(theta, J)
    if not spec.stationary:
        raise MomentNotFiniteError(f"lambda_max = {spec.lambda_max:.4g} >= 1: moments do not exist")
    mu_m = innovation_moment(m, theta)
    log_prod = 0.0
    for th in spec.theta_weights:
        if th == 0.0:
            continue
        lf = math.log(innovation_mgf(m * th, theta))
        log_prod += lf
        if abs(lf) < tol:
            break
    return mu_m * math.exp(m * theta.varpi / (1.0 - sum(theta.rho)) + log_prod)


def dispersion_index(theta: ParamVector, J=200):
    """``(1 + delta_Y, 1 + delta^2)``: squared-CV-plus-one of ``Y_t`` and of the innovation."""
    m1 = acd_moment(1, theta, J)
    m2 = acd_moment(2, theta, J)
    e1 = innovation_moment(1, theta)
    e2 = innovation_moment(2, theta)
    return m2 / m1 ** 2, e2 / e1 ** 2
