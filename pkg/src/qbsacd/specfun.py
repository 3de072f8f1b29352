"""Scalar special functions for the normal, skew-normal and half-normal laws.

Everything here accepts scalars; the normal helpers also broadcast over
numpy arrays because the likelihood code calls them on whole series.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT2 = math.sqrt(2.0)


def _check_prob(p, name="p"):
    if not (0.0 < p < 1.0):
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {p!r}")


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


def std_normal_cdf(x):
    """Standard normal CDF, erfc-based so both tails keep full relative accuracy."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def std_normal_logcdf(x):
    out = special.log_ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    _check_prob(p)
    return float(special.ndtri(p))


def owens_t(h, a):
    """Owen's T function ``T(h, a)``.

    Defined as ``(1/2pi) * int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx``.
    The evaluation routes through ``|h|`` and ``|a|`` so the parity
    relations ``T(-h,a) = T(h,a)`` and ``T(h,-a) = -T(h,a)`` hold exactly.
    """
    h = abs(float(h))
    a = float(a)
    if a == 0.0:
        return 0.0
    sign = 1.0 if a > 0 else -1.0
    return sign * float(special.owens_t(h, abs(a)))


def sn_pdf(x, lam):
    """Skew-normal density ``2 phi(x) Phi(lam x)``."""
    x = np.asarray(x, dtype=float)
    out = 2.0 * std_normal_pdf(x) * special.ndtr(lam * x)
    return out if np.ndim(out) else float(out)


def _sn_lower_tail_quad(x, lam):
    """``P(X <= x)`` by quadrature, for ``x`` deep in the lower tail and ``lam > 0``."""
    log_at_x = float(special.log_ndtr(lam * x))

    def integrand(u):
        return math.exp(x * u - 0.5 * u * u + float(special.log_ndtr(lam * (x - u))) - log_at_x)

    # The integrand is bounded by exp(x u), so 50/|x| covers it to e^-50.
    upper = 50.0 / abs(x)
    knee = upper / (1.0 + lam * lam)
    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=200,
                            points=[knee / 50.0, knee])
    return 2.0 * _INV_SQRT_2PI * math.exp(-0.5 * x * x + log_at_x) * val


def _sn_lower(x, lam):
    """``P(X <= x)`` for an array of ``x <= 0``."""
    out = special.ndtr(x) - 2.0 * np.sign(lam) * special.owens_t(np.abs(x), abs(lam))
    if lam > 0.0:
        # Phi(x) and 2T(x, lam) nearly cancel here; integrate instead.
        for i in np.flatnonzero(out <= 1e-6):
            out[i] = _sn_lower_tail_quad(float(x[i]), lam)
    return out


def _sn_split(x, lam, upper):
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    if lam == 0.0:
        out[:] = special.ndtr(-flat if upper else flat)
    else:
        # lower-tail probability of the reflected variable for the far side
        left = flat <= 0.0 if not upper else flat < 0.0
        if upper:
            out[~left] = _sn_lower(-flat[~left], -lam)
            out[left] = 1.0 - _sn_lower(flat[left], lam)
        else:
            out[left] = _sn_lower(flat[left], lam)
            out[~left] = 1.0 - _sn_lower(-flat[~left], -lam)
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def sn_cdf(x, lam):
    """Skew-normal CDF, ``Phi(x) - 2 T(x, lam)``.

    Computed on whichever tail is small; a scaled quadrature takes over in
    the far lower tail where the Owen's T form loses all relative accuracy.
    """
    return _sn_split(x, float(lam), upper=False)


def sn_sf(x, lam):
    """Skew-normal survival function ``1 - sn_cdf(x, lam)``, tail-accurate."""
    return _sn_split(x, float(lam), upper=True)


@lru_cache(maxsize=4096)
def sn_quantile(q, lam):
    """Quantile of the standard skew-normal ``SN(lam)``.

    Safeguarded Newton iteration inside the bracket
    ``[-10 - |lam|, 10 + |lam|]``; bisection whenever a Newton step would
    leave the current bracket.  Below the median the iteration works on
    ``log F`` and above it on ``-log(1 - F)``, which keeps the steps
    well-scaled in both tails.
    """
    _check_prob(q, "q")
    q = float(q)
    lam = float(lam)
    if lam == 0.0:
        return float(special.ndtri(q))
    lo, hi = -10.0 - abs(lam), 10.0 + abs(lam)
    delta = lam / math.sqrt(1.0 + lam * lam)
    mean = delta * _SQRT_2_OVER_PI
    sd = math.sqrt(1.0 - mean * mean)
    x = min(max(mean + sd * float(special.ndtri(q)), lo), hi)
    lower = q <= 0.5
    target = math.log(q) if lower else math.log1p(-q)
    for _ in range(200):
        if lower:
            F = sn_cdf(x, lam)
            g = (math.log(F) - target) if F > 0.0 else -math.inf
            dg = sn_pdf(x, lam) / F if F > 0.0 else math.inf
        else:
            S = sn_sf(x, lam)
            g = (target - math.log(S)) if S > 0.0 else math.inf
            dg = sn_pdf(x, lam) / S if S > 0.0 else math.inf
        if abs(g) <= 1e-15:
            break
        if g > 0.0:
            hi = x
        else:
            lo = x
        x_new = x - g / dg if (math.isfinite(g) and dg > 0.0 and math.isfinite(dg)) else math.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def hn_quantile(q):
    """Half-normal quantile, ``sqrt(2) * erfinv(q)``."""
    _check_prob(q, "q")
    return _SQRT2 * inverse_erf(q)


def mills(x):
    """Inverse Mills ratio ``phi(x) / Phi(x)``.

    For negative arguments the ratio is formed through the scaled
    complementary error function, which stays finite where both ``phi``
    and ``Phi`` underflow.  Broadcasts over arrays.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    neg = x < 0.0
    xn = x[neg]
    out[neg] = _SQRT_2_OVER_PI / special.erfcx(-xn / _SQRT2)
    xp = x[~neg]
    out[~neg] = _INV_SQRT_2PI * np.exp(-0.5 * xp * xp) / special.ndtr(xp)
    return out if out.ndim else float(out)


def inverse_erf(x):
    """Inverse error function on (-1, 1)."""
    if not -1.0 < x < 1.0:
        raise ValueError(f"inverse_erf needs x in (-1, 1), got {x!r}")
    return float(special.erfinv(x))
