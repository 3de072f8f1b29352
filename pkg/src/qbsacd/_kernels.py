"""Numba kernels for the log-quantile recursion and its parameter derivatives.

Shared by the skew-QBS model and the baseline ACD models: all of them drive
``psi_t = log(location_t)`` with

    psi_t = varpi + sum_j rho_j psi_{t-j} + sum_j sigma_j y_{t-j} exp(-psi_{t-j}),

where pre-sample ``psi`` equals ``psi0`` and pre-sample ``y`` equals ``y0``.
"""
import math

import numpy as np
from numba import njit

# |psi| beyond this means the location left [1e-300, 1e300]
PSI_LIMIT = 690.0


@njit(cache=True)
def psi_path(y, varpi, rho, sigma, psi0, y0):
    """Return ``(psi, ok)``; ``ok`` is False once the path explodes."""
    n = y.shape[0]
    r = rho.shape[0]
    s = sigma.shape[0]
    psi = np.empty(n)
    for t in range(n):
        acc = varpi
        for j in range(1, r + 1):
            acc += rho[j - 1] * (psi[t - j] if t - j >= 0 else psi0)
        for j in range(1, s + 1):
            if t - j >= 0:
                acc += sigma[j - 1] * y[t - j] * math.exp(-psi[t - j])
            else:
                acc += sigma[j - 1] * y0 * math.exp(-psi0)
        if not (abs(acc) < PSI_LIMIT):
            return psi, False
        psi[t] = acc
    return psi, True


@njit(cache=True)
def psi_derivatives(y, psi, rho, sigma, psi0, y0, second):
    """First (and optionally second) derivatives of ``psi_t``.

    Parameters are ordered ``(varpi, rho_1..r, sigma_1..s, psi0)``.
    Pre-sample derivatives are those of the constant ``psi0``.
    """
    n = y.shape[0]
    r = rho.shape[0]
    s = sigma.shape[0]
    m = r + s + 2
    i_psi0 = m - 1
    D = np.zeros((n, m))
    H = np.zeros((n, m, m)) if second else np.zeros((1, m, m))
    Dpre = np.zeros(m)
    Dpre[i_psi0] = 1.0
    Hpre = np.zeros((m, m))
    for t in range(n):
        D[t, 0] = 1.0
        for j in range(1, r + 1):
            if t - j >= 0:
                D[t, j] += psi[t - j]
                D[t] += rho[j - 1] * D[t - j]
            else:
                D[t, j] += psi0
                D[t] += rho[j - 1] * Dpre
        for j in range(1, s + 1):
            if t - j >= 0:
                g = y[t - j] * math.exp(-psi[t - j])
                D[t, r + j] += g
                D[t] -= sigma[j - 1] * g * D[t - j]
            else:
                g = y0 * math.exp(-psi0)
                D[t, r + j] += g
                D[t] -= sigma[j - 1] * g * Dpre
        if second:
            for j in range(1, r + 1):
                Dl = D[t - j] if t - j >= 0 else Dpre
                Hl = H[t - j] if t - j >= 0 else Hpre
                for a in range(m):
                    H[t, j, a] += Dl[a]
                    H[t, a, j] += Dl[a]
                H[t] += rho[j - 1] * Hl
            for j in range(1, s + 1):
                if t - j >= 0:
                    Dl = D[t - j]
                    Hl = H[t - j]
                    g = y[t - j] * math.exp(-psi[t - j])
                else:
                    Dl = Dpre
                    Hl = Hpre
                    g = y0 * math.exp(-psi0)
                for a in range(m):
                    H[t, r + j, a] -= g * Dl[a]
                    H[t, a, r + j] -= g * Dl[a]
                for a in range(m):
                    for b in range(m):
                        H[t, a, b] -= sigma[j - 1] * g * (Hl[a, b] - Dl[a] * Dl[b])
    return D, H


@njit(cache=True)
def simulate_path(rho_mult, varpi, rho, sigma, psi0, y0):
    """Generate ``y_t = exp(psi_t) * rho_mult[t]`` recursively.

    ``rho_mult`` holds iid unit-quantile multipliers.  Returns
    ``(y, psi, ok)``.
    """
    n = rho_mult.shape[0]
    r = rho.shape[0]
    s = sigma.shape[0]
    psi = np.empty(n)
    y = np.empty(n)
    for t in range(n):
        acc = varpi
        for j in range(1, r + 1):
            acc += rho[j - 1] * (psi[t - j] if t - j >= 0 else psi0)
        for j in range(1, s + 1):
            if t - j >= 0:
                acc += sigma[j - 1] * y[t - j] * math.exp(-psi[t - j])
            else:
                acc += sigma[j - 1] * y0 * math.exp(-psi0)
        if not (abs(acc) < PSI_LIMIT):
            return y, psi, False
        psi[t] = acc
        y[t] = math.exp(acc) * rho_mult[t]
    return y, psi, True


@njit(cache=True)
def ecm_q(y, varpi, rho, sigma, psi0, y0, L, alpha_d, lam, u_hat):
    """Expected complete-data log-likelihood as a function of the dynamics.

    Only the terms that vary with ``(varpi, rho, sigma)`` are kept:
    ``sum_t log cosh w_t - 2 sinh(w_t)^2 / alpha_d^2 + (2 lam / alpha_d) sinh(w_t) u_t``
    with ``w_t = L - psi_t / 2 + log(y_t) / 2 - log 2``.  Returns ``-inf`` if
    the path explodes.
    """
    psi, ok = psi_path(y, varpi, rho, sigma, psi0, y0)
    if not ok:
        return -np.inf
    c = 2.0 * lam / alpha_d
    inv = 2.0 / (alpha_d * alpha_d)
    total = 0.0
    for t in range(y.shape[0]):
        w = L - 0.5 * psi[t] + 0.5 * math.log(y[t]) - math.log(2.0)
        sh = math.sinh(w)
        # log cosh without overflow
        aw = abs(w)
        lc = aw + math.log1p(math.exp(-2.0 * aw)) - math.log(2.0)
        total += lc - inv * sh * sh + c * sh * u_hat[t]
    return total
