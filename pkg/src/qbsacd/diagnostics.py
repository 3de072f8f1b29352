"""Residual diagnostics, model comparison and quantile forecasts."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .acd import ExplosivePathError, ParamVector, PathInit, as_series, quantile_path
from .dist import SkewQBS
from .estimate import FitReport, baseline_logsurvival, baseline_path, information_criteria

# -log of the smallest survival probability reported before capping
GCS_CAP = -math.log(1e-300)

__all__ = [
    "gcs_residuals", "residual_summary", "ResidualSummary", "ljung_box", "qq_envelope",
    "EnvelopeBand", "information_criteria", "forecast_quantile", "ForecastResult",
    "exp_plotting_positions",
]


def _cap(r):
    bad = ~np.isfinite(r) | (r > GCS_CAP)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} residual(s) beyond the survival underflow limit were capped",
                      RuntimeWarning, stacklevel=3)
        r = np.where(bad, GCS_CAP, r)
    return np.maximum(r, 0.0)


def gcs_residuals(y, fit, init=None):
    """Generalized Cox-Snell residuals ``-log S(y_t | past)``.

    ``fit`` is a :class:`ParamVector` or a :class:`FitReport`; EXP and GG
    baseline reports use their own conditional survival functions.
    """
    y = as_series(y)
    if isinstance(fit, FitReport) and fit.theta_hat is None:
        psi, shape = baseline_path(fit, y)
        with np.errstate(divide="ignore"):
            r = -baseline_logsurvival(fit.model, y, psi, shape)
        return _cap(r)
    theta = fit.theta_hat if isinstance(fit, FitReport) else fit
    xi = quantile_path(y, theta, init)
    surv = np.asarray(SkewQBS(theta.alpha, xi, theta.lam, theta.q).survival(y), dtype=float)
    with np.errstate(divide="ignore"):
        r = -np.log(surv)
    return _cap(r)


@dataclass(frozen=True)
class ResidualSummary:
    """Mean, sd (n-1), skewness and raw (non-excess) kurtosis; EXP(1) gives 1, 1, 2, 9."""

    mean: float
    sd: float
    skewness: float
    kurtosis: float

    def as_tuple(self):
        return (self.mean, self.sd, self.skewness, self.kurtosis)


def residual_summary(r) -> ResidualSummary:
    """Moment summary of a residual series.

    Skewness and kurtosis use n-denominator central moments; they are
    ``nan`` when the series is constant.
    """
    r = np.asarray(r, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two residuals")
    mean = float(np.mean(r))
    sd = float(np.std(r, ddof=1))
    d = r - mean
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        return ResidualSummary(mean, 0.0, math.nan, math.nan)
    skew = float(np.mean(d ** 3)) / m2 ** 1.5
    kurt = float(np.mean(d ** 4)) / m2 ** 2
    return ResidualSummary(mean, sd, skew, kurt)


def ljung_box(x, lags, fitted_params=0):
    """Ljung-Box portmanteau statistic and chi-square p-value.

    ``Q = n (n + 2) sum_{k=1}^{l} r_k^2 / (n - k)`` with ``l - fitted_params``
    degrees of freedom, floored at 1 (with a warning).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    lags = int(lags)
    if not 1 <= lags < n:
        raise ValueError(f"lags must lie in [1, n), got {lags}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        acf = np.zeros(lags)
    else:
        acf = np.array([np.dot(d[k:], d[:-k]) / denom for k in range(1, lags + 1)])
    q = float(n * (n + 2) * np.sum(acf ** 2 / (n - np.arange(1, lags + 1))))
    dof = lags - int(fitted_params)
    if dof < 1:
        warnings.warn(f"Ljung-Box degrees of freedom {dof} floored at 1", RuntimeWarning,
                      stacklevel=2)
        dof = 1
    return q, float(stats.chi2.sf(q, dof))


def exp_plotting_positions(n):
    """EXP(1) quantiles at Blom positions ``(i - 0.375) / (n + 0.25)``."""
    i = np.arange(1, n + 1)
    return -np.log1p(-(i - 0.375) / (n + 0.25))


@dataclass(frozen=True)
class EnvelopeBand:
    theoretical: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    observed: np.ndarray
    level: float

    @property
    def outside(self):
        """Boolean mask of observed order statistics outside the band."""
        return (self.observed < self.lower) | (self.observed > self.upper)

    @property
    def fraction_outside(self):
        return float(np.mean(self.outside))


def qq_envelope(r, reps=100, level=0.95, rng=None) -> EnvelopeBand:
    """Simulated pointwise envelope for an EXP(1) QQ plot of ``r``.

    ``reps`` iid EXP(1) samples of size ``n`` are sorted and the pointwise
    ``(1 - level)/2`` and ``(1 + level)/2`` quantiles form the band.
    Quantiles use Weibull positions ``p (reps + 1)`` so that a fresh EXP(1)
    sample falls outside each side with probability ``(1 - level)/2``.
    """
    r = np.sort(np.asarray(r, dtype=float))
    if reps < 19:
        raise ValueError("reps must be at least 19")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    sims = np.sort(rng.exponential(size=(int(reps), r.size)), axis=1)
    lo, hi = np.quantile(sims, [(1.0 - level) / 2.0, (1.0 + level) / 2.0], axis=0,
                         method="weibull")
    return EnvelopeBand(exp_plotting_positions(r.size), lo, hi, r, float(level))


@dataclass(frozen=True)
class ForecastResult:
    """One-step conditional-quantile forecasts over an evaluation window."""

    t: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    mse: float
    mode: str
    split_index: int


def forecast_quantile(y, theta_hat: ParamVector, split=2.0 / 3.0, mode="out_of_sample",
                      init=None) -> ForecastResult:
    """Quantile forecasts with parameters held at ``theta_hat``.

    ``in_sample`` returns the fitted path over the whole series.
    ``out_of_sample`` evaluates ``t >= floor(split * n)``: the recursion is
    rolled through the holdout with realized lagged durations, which makes
    every value a one-step-ahead forecast.  ``theta_hat`` should come from a
    fit on ``y[:floor(split * n)]``; the pre-sample rule then also uses that
    window only.  Time indices ``t`` are 1-based.
    """
    y = as_series(y)
    n = y.size
    if mode == "in_sample":
        xi = quantile_path(y, theta_hat, init)
        start = 0
    elif mode == "out_of_sample":
        if not 0.0 < split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        start = int(math.floor(split * n))
        if start < 1 or start >= n:
            raise ValueError("split leaves an empty estimation or evaluation window")
        init = _window_init(y[:start], init)
        xi = quantile_path(y, theta_hat, init)[start:]
    else:
        raise ValueError(f"unknown forecast mode {mode!r}")
    realized = y[start:]
    mse = float(np.mean((xi - realized) ** 2))
    return ForecastResult(np.arange(start + 1, n + 1), xi, realized, mse, mode, start)


def _window_init(y_est, init):
    if init is None:
        return PathInit(level=float(np.median(y_est)), y0=float(np.mean(y_est)))
    return init


def one_step_ahead(y, theta_hat: ParamVector, init=None):
    """Forecast of ``xi_{n+1}`` from the full series."""
    y = as_series(y)
    xi = quantile_path(y, theta_hat, init)
    r, s = theta_hat.order
    logxi = np.log(xi)
    acc = theta_hat.varpi
    for j in range(1, r + 1):
        if y.size - j < 0:
            raise ValueError("series shorter than the model order")
        acc += theta_hat.rho[j - 1] * logxi[-j]
    for j in range(1, s + 1):
        acc += theta_hat.sigma[j - 1] * y[-j] / xi[-j]
    if not abs(acc) < 690.0:
        raise ExplosivePathError("forecast exceeded the representable range")
    return math.exp(acc)
