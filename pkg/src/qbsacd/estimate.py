"""Estimation of skew-QBS-ACD models and the baseline ACD models.

Two routes to the MLE are provided.  :func:`fit_ecm` is the ECM
algorithm built on the half-normal stochastic representation;
:func:`fit_direct_ml` maximizes the observed likelihood with a
quasi-Newton method on the analytic score and finishes with a few
Newton steps on the analytic Hessian.

Level change
------------
Moving the conditional-quantile path by ``psi_t -> psi_t + k`` is absorbed
exactly by ``varpi -> varpi + k (1 - sum(rho))`` and ``sigma -> sigma e^k``.
:func:`shift_level` applies this map.  ECM uses it to keep the implied
BS-scale path fixed across CM-step 1, and profile-q uses it to carry a
solution from one quantile level to the next.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special, stats

from . import _kernels
from .acd import (ExplosivePathError, ParamVector, PathInit, SingularInformationError,
                  _init, _psi, as_series, hessian, loglik, observed_info_se, quantile_path,
                  score)
from .dist import log_eta_derivs
from .specfun import mills

LAMBDA_BOUND = 50.0
_LOG_2 = math.log(2.0)


class FitError(RuntimeError):
    """Estimation could not produce a usable fit."""


@dataclass(frozen=True)
class EcmConfig:
    """ECM stopping rule and CM-step-2 optimizer settings.

    ``shape_step`` adds a third conditional maximization per sweep: the
    observed log-likelihood over ``(alpha, lam)`` and a level shift of the
    dynamics, the rest held fixed.  It leaves the sweep monotone and removes
    the very slow drift of plain ECM along ``lam`` near zero skewness.
    """

    epsilon: float = 1e-6
    max_iter: int = 500
    inner_max_iter: int = 50
    inner_gtol: float = 1e-7
    accelerate: bool = True
    shape_step: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class EStepMoments:
    """Posterior moments ``E[U_t | y_t]`` and ``E[U_t^2 | y_t]``."""

    u_hat: np.ndarray
    u2_hat: np.ndarray


@dataclass
class FitReport:
    """Outcome of one model fit.

    ``theta_hat`` is a :class:`ParamVector` for the skew-QBS and BS models
    and ``None`` for the EXP and GG baselines, whose estimates live in
    ``estimates`` under ``names``.
    """

    model: str
    method: str
    order: tuple
    q: float | None
    names: list
    estimates: np.ndarray
    se: np.ndarray
    loglik: float
    aic: float
    bic: float
    n: int
    iterations: int
    converged: bool
    loglik_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    theta_hat: ParamVector | None = None
    message: str = ""

    @property
    def k(self):
        return len(self.names)

    @property
    def dynamics_count(self):
        return 1 + self.order[0] + self.order[1]

    def as_dict(self):
        return {
            "model": self.model,
            "method": self.method,
            "order": list(self.order),
            "q": self.q,
            "n": self.n,
            "estimates": {k: float(v) for k, v in zip(self.names, self.estimates)},
            "se": {k: float(v) for k, v in zip(self.names, self.se)},
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "message": self.message,
        }


def information_criteria(loglik_value, k, n):
    """``(AIC, BIC)`` for a fit with ``k`` free parameters on ``n`` observations."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return -2.0 * loglik_value + 2.0 * k, -2.0 * loglik_value + k * math.log(n)


def shift_level(theta: ParamVector, k):
    """Dynamics reproducing ``psi_t + k`` for every ``t`` (see module notes)."""
    return theta.replace(varpi=theta.varpi + k * (1.0 - sum(theta.rho)),
                         sigma=tuple(s * math.exp(k) for s in theta.sigma))


def change_level(theta: ParamVector, q_new):
    """Equivalent parameters at quantile level ``q_new``: same law for every ``y_t``."""
    L_old = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
    L_new = log_eta_derivs(theta.alpha, theta.lam, q_new)[0]
    return shift_level(theta, 2.0 * (L_new - L_old)).replace(q=q_new)


def _delta(lam):
    return lam / math.sqrt(1.0 + lam * lam)


def _a_path(y, theta, init):
    psi, *_ = _psi(y, theta, init)
    L = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
    w = L - 0.5 * psi + 0.5 * np.log(y) - _LOG_2
    return 2.0 * np.sinh(w) / theta.alpha, w


# ---------------------------------------------------------------- ECM


def e_step(y, theta_hat: ParamVector, init=None) -> EStepMoments:
    """Posterior moments of the half-normal latent variable.

    ``U | y ~ N(delta a, 1 - delta^2)`` truncated to ``[0, inf)``, so with
    ``s = sqrt(1 - delta^2)`` and ``m`` the inverse Mills ratio,
    ``E[U|y] = delta a + s m(lam a)`` and
    ``E[U^2|y] = delta^2 a^2 + s^2 + delta s m(lam a) a``.
    """
    y = as_series(y)
    lam = theta_hat.lam
    s2 = 1.0 / (1.0 + lam * lam)
    if not s2 > 0.0 or not np.isfinite(lam):
        raise FloatingPointError("1 - delta^2 underflows: lambda is too large for the E-step")
    s = math.sqrt(s2)
    d = lam * s
    a, _ = _a_path(y, theta_hat, init)
    m = mills(lam * a)
    u = d * a + s * m
    u2 = d * d * a * a + s2 + d * s * m * a
    # guard rounding; both moments are of a nonnegative variable
    u = np.maximum(u, 0.0)
    u2 = np.maximum(u2, u * u)
    return EStepMoments(u, u2)


def cm_step1(y, moments: EStepMoments, theta: ParamVector, init=None):
    """Closed-form update of ``(alpha, delta)`` with the BS-scale path held fixed.

    ``b_t = sqrt(y_t / beta_t) - sqrt(beta_t / y_t)`` where
    ``beta_t = 4 xi_t / eta^2`` uses the current ``eta``.  Returns
    ``(alpha_new, delta_new)``.
    """
    y = as_series(y)
    a, _ = _a_path(y, theta, init)
    b = theta.alpha * a
    su2 = float(np.sum(moments.u2_hat))
    if not su2 > 0.0:
        raise FloatingPointError("sum of E[U^2|y] is not positive")
    n = y.size
    c = float(np.sum(moments.u_hat * b)) / su2
    alpha2 = float(np.sum(b * b)) / n + (1.0 - su2 / n) * c * c
    if not (np.isfinite(alpha2) and alpha2 > 0.0):
        raise FloatingPointError("CM-step 1 produced a nonpositive alpha^2")
    alpha_new = math.sqrt(alpha2)
    delta_new = c / alpha_new
    lim = 1.0 - 1e-10
    if abs(delta_new) > lim:
        warnings.warn("CM-step 1 delta left (-1, 1); clamped", RuntimeWarning, stacklevel=2)
        delta_new = math.copysign(lim, delta_new)
    return alpha_new, delta_new


def q_function(y, moments: EStepMoments, theta: ParamVector, init=None):
    """Dynamics-dependent part of the expected complete-data log-likelihood."""
    y = as_series(y)
    pi = _init(init)
    psi0, y0, _ = pi.resolve(y, theta)
    L = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
    alpha_d = theta.alpha / math.sqrt(1.0 + theta.lam ** 2)
    return _kernels.ecm_q(y, float(theta.varpi), np.array(theta.rho, dtype=float),
                          np.array(theta.sigma, dtype=float), psi0, y0, L, alpha_d,
                          float(theta.lam), moments.u_hat)


@dataclass(frozen=True)
class CmStep2Result:
    theta: ParamVector
    q_value: float
    q_start: float
    converged: bool
    message: str


def cm_step2(y, moments: EStepMoments, theta: ParamVector, init=None,
             config: EcmConfig = EcmConfig()) -> CmStep2Result:
    """Maximize the Q-function over ``(varpi, rho, sigma)`` with ``(alpha, lam)`` fixed.

    BFGS with central-difference gradients.  The start is returned
    unchanged if the optimizer does not improve on it.
    """
    y = as_series(y)
    r, s = theta.order
    n = y.size
    psi0, y0, _ = _init(init).resolve(y, theta)
    L = log_eta_derivs(theta.alpha, theta.lam, theta.q)[0]
    alpha_d = theta.alpha / math.sqrt(1.0 + theta.lam ** 2)
    lam = float(theta.lam)
    u = moments.u_hat

    def negq(v):
        val = _kernels.ecm_q(y, v[0], v[1:1 + r], v[1 + r:], psi0, y0, L, alpha_d, lam, u)
        return -val / n if np.isfinite(val) else 1e10

    x0 = np.array([theta.varpi, *theta.rho, *theta.sigma])
    q0 = -negq(x0) * n
    res = optimize.minimize(negq, x0, method="BFGS", jac="3-point",
                            options={"maxiter": config.inner_max_iter, "gtol": config.inner_gtol})
    q1 = -res.fun * n
    if not (np.isfinite(q1) and q1 >= q0):
        return CmStep2Result(theta, q0, q0, False, "no ascent; dynamics kept")
    new = theta.replace(varpi=res.x[0], rho=tuple(res.x[1:1 + r]), sigma=tuple(res.x[1 + r:]))
    return CmStep2Result(new, q1, q0, bool(res.success), str(res.message))


def _standard_errors(y, theta, init, k_free=None):
    try:
        se = observed_info_se(y, theta, init)
        return se, ""
    except (SingularInformationError, np.linalg.LinAlgError, ExplosivePathError) as exc:
        return np.full(theta.dim, np.nan), str(exc)


def _report(y, theta, init, method, model, it, converged, trace, message, pinned_lambda=False):
    ll = loglik(y, theta, init)
    if pinned_lambda:
        names = theta.names[:-1]
        est = theta.to_array()[:-1]
        try:
            H = hessian(y, theta, init)[:-1, :-1]
            cov = np.linalg.inv(np.linalg.cholesky(-H))
            se = np.sqrt(np.sum(cov * cov, axis=0))
        except np.linalg.LinAlgError:
            se = np.full(len(names), np.nan)
            message = (message + "; " if message else "") + "observed information not positive definite"
    else:
        names = theta.names
        est = theta.to_array()
        se, err = _standard_errors(y, theta, init)
        if err:
            message = (message + "; " if message else "") + err
    aic, bic = information_criteria(ll, len(names), y.size)
    return FitReport(model=model, method=method, order=theta.order, q=theta.q, names=list(names),
                     estimates=np.asarray(est, dtype=float), se=np.asarray(se, dtype=float),
                     loglik=float(ll), aic=aic, bic=bic, n=y.size, iterations=int(it),
                     converged=bool(converged), loglik_trace=np.asarray(trace, dtype=float),
                     theta_hat=theta, message=message)


def _check_order(order):
    r, s = (int(v) for v in order)
    if r < 0 or s < 0:
        raise ValueError("model order must be nonnegative")
    return r, s


def _ecm_sweep(y, theta, q, init, config, moves):
    """One E-step / CM-step 1 / level shift / CM-step 2 pass."""
    mom = e_step(y, theta, init)
    alpha_new, delta_new = cm_step1(y, mom, theta, init)
    lam_new = delta_new / math.sqrt((1.0 - delta_new) * (1.0 + delta_new))
    lam_new = float(np.clip(lam_new, -LAMBDA_BOUND, LAMBDA_BOUND))
    cand = theta.replace(alpha=alpha_new, lam=lam_new)
    if moves:
        # pre-sample value follows eta, so the whole path moves with it
        L_old = log_eta_derivs(theta.alpha, theta.lam, q)[0]
        L_new = log_eta_derivs(alpha_new, lam_new, q)[0]
        cand = shift_level(cand, 2.0 * (L_new - L_old))
    cand = cm_step2(y, mom, cand, init, config).theta
    if config.shape_step:
        cand = cm_step3(y, cand, init, config)
    return cand, loglik(y, cand, init)


def cm_step3(y, theta: ParamVector, init=None, config: EcmConfig = EcmConfig()) -> ParamVector:
    """Maximize the observed log-likelihood over ``(log alpha, lam, k)``.

    ``k`` moves the dynamics by :func:`shift_level`; ``rho`` and the ratio
    of the ``sigma`` coefficients stay fixed.  The start is returned when the
    optimizer does not improve on it.
    """
    y = as_series(y)
    n = y.size
    r = len(theta.rho)
    ll0 = loglik(y, theta, init)

    def build(x):
        return shift_level(theta.replace(alpha=math.exp(x[0]), lam=x[1]), x[2])

    def fun(x):
        if abs(x[0]) > 30.0 or abs(x[2]) > 30.0:
            return 1e10, np.zeros(3)
        th = build(x)
        ll = loglik(y, th, init)
        if not np.isfinite(ll):
            return 1e10, np.zeros(3)
        g = score(y, th, init)
        jac_k = np.concatenate([[0.0, 1.0 - sum(th.rho)], np.zeros(r), np.asarray(th.sigma), [0.0]])
        grad = np.array([g[0] * th.alpha, g[-1], float(g @ jac_k)])
        return -ll / n, -grad / n

    x0 = np.array([math.log(theta.alpha), theta.lam, 0.0])
    res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                            bounds=[(None, None), (-LAMBDA_BOUND, LAMBDA_BOUND), (None, None)],
                            options={"maxiter": config.inner_max_iter, "gtol": 1e-10})
    cand = build(res.x)
    return cand if loglik(y, cand, init) > ll0 else theta


def _ecm_vec(theta):
    v = theta.to_array()
    v[0] = math.log(v[0])
    return v


def _squarem_point(theta0, theta1, theta2):
    """SQUAREM extrapolation from three successive ECM iterates, or ``None``."""
    v0, v1, v2 = _ecm_vec(theta0), _ecm_vec(theta1), _ecm_vec(theta2)
    r = v1 - v0
    v = v2 - 2.0 * v1 + v0
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return None
    step = min(-float(np.linalg.norm(r)) / nv, -1.0)
    x = v0 - 2.0 * step * r + step * step * v
    if abs(x[-1]) > LAMBDA_BOUND or x[0] > 700.0:
        return None
    x[0] = math.exp(x[0])
    try:
        return ParamVector.from_array(x, theta0.order, theta0.q)
    except ValueError:
        return None


def fit_ecm(y, q, order, config: EcmConfig = EcmConfig(), start: ParamVector | None = None,
            init=None) -> FitReport:
    """ECM estimation.

    Each sweep runs the E-step, the closed-form ``(alpha, delta)`` update,
    then the numerical dynamics update.  After CM-step 1 the dynamics are
    passed through :func:`shift_level` so the BS-scale path is exactly the
    one the closed form was derived for; the sweep is then a generalized
    EM step and the observed log-likelihood cannot decrease.

    With ``config.accelerate`` each iteration runs two sweeps, extrapolates
    with SQUAREM and takes one more sweep from the extrapolated point; that
    point is kept only if it beats the plain two-sweep result, so the
    log-likelihood trace stays nondecreasing.  Stops when the increase over
    an iteration falls to ``config.epsilon``.
    """
    y = as_series(y)
    order = _check_order(order)
    theta = start if start is not None else starting_values(y, q, order, init=init)
    if theta.order != order or theta.q != q:
        raise ValueError("start does not match the requested order and q")
    ll = loglik(y, theta, init)
    if not np.isfinite(ll):
        raise FitError("log-likelihood is not finite at the starting point")
    trace = [ll]
    converged = False
    message = ""
    it = 0
    moves = _init(init).xi is None
    slack = 1e-10 * max(1.0, abs(ll))
    for it in range(1, config.max_iter + 1):
        cand, ll_new = _ecm_sweep(y, theta, q, init, config, moves)
        if config.accelerate and np.isfinite(ll_new):
            cand2, ll2 = _ecm_sweep(y, cand, q, init, config, moves)
            if np.isfinite(ll2) and ll2 >= ll_new - slack:
                jump = _squarem_point(theta, cand, cand2)
                cand, ll_new = cand2, ll2
                # a jump below the iteration's start is discarded unswept
                if jump is not None and loglik(y, jump, init) >= ll:
                    try:
                        cand3, ll3 = _ecm_sweep(y, jump, q, init, config, moves)
                    except (ExplosivePathError, FloatingPointError, ValueError,
                            np.linalg.LinAlgError):
                        ll3 = -np.inf
                    if np.isfinite(ll3) and ll3 > ll_new:
                        cand, ll_new = cand3, ll3
        if not np.isfinite(ll_new) or ll_new < ll - slack:
            message = f"iteration {it}: log-likelihood decreased ({ll_new - ll:.3e}); stopped"
            break
        gain = ll_new - ll
        theta, ll = cand, ll_new
        trace.append(ll)
        if gain <= config.epsilon:
            converged = True
            break
    else:
        message = f"max_iter={config.max_iter} reached"
    return _report(y, theta, init, "ecm", "skew_qbs", it, converged, trace, message)


# ------------------------------------------------------------ direct ML


def _pack(theta, alpha_transform):
    v = theta.to_array()
    if alpha_transform == "log":
        v[0] = math.log(v[0])
    return v


def _unpack(v, order, q, alpha_transform):
    v = np.array(v, dtype=float)
    if alpha_transform == "log":
        v[0] = math.exp(min(v[0], 700.0))
    return ParamVector.from_array(v, order, q)


def _newton_polish(y, theta, init, free, steps=8, tol=1e-9):
    """Damped Newton steps on the analytic Hessian over the ``free`` coordinates."""
    ll = loglik(y, theta, init)
    for _ in range(steps):
        g = score(y, theta, init)[free]
        if np.max(np.abs(g)) <= tol * max(1.0, y.size):
            break
        H = hessian(y, theta, init)[np.ix_(free, free)]
        try:
            np.linalg.cholesky(-H)
        except np.linalg.LinAlgError:
            break
        step = np.linalg.solve(-H, g)
        t = 1.0
        improved = False
        base = theta.to_array()
        while t > 1e-4:
            v = base.copy()
            v[free] += t * step
            if v[0] <= 0 or abs(v[-1]) > LAMBDA_BOUND:
                t *= 0.5
                continue
            cand = ParamVector.from_array(v, theta.order, theta.q)
            ll_c = loglik(y, cand, init)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-12 * abs(ll):
                theta, ll, improved = cand, ll_c, True
                break
            t *= 0.5
        if not improved:
            break
    return theta


def _maximize(y, start, init, pin_lambda=False, alpha_transform="log", max_iter=2000):
    order, q = start.order, start.q
    k = start.dim
    free = np.arange(k - 1) if pin_lambda else np.arange(k)
    full0 = _pack(start, alpha_transform)
    n = y.size

    def expand(x):
        v = full0.copy()
        v[free] = x
        return v

    def fun(x):
        v = expand(x)
        try:
            theta = _unpack(v, order, q, alpha_transform)
        except ValueError:
            return 1e10, np.zeros_like(x)
        ll = loglik(y, theta, init)
        if not np.isfinite(ll):
            return 1e10, np.zeros_like(x)
        g = score(y, theta, init)
        if alpha_transform == "log":
            g[0] *= theta.alpha
        if not np.all(np.isfinite(g)):
            return 1e10, np.zeros_like(x)
        return -ll / n, -g[free] / n

    bounds = [(None, None)] * k
    if alpha_transform != "log":
        bounds[0] = (1e-8, None)
    bounds[-1] = (-LAMBDA_BOUND, LAMBDA_BOUND)
    res = optimize.minimize(fun, full0[free], jac=True, method="L-BFGS-B",
                            bounds=[bounds[i] for i in free],
                            options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10,
                                     "maxcor": 20})
    theta = _unpack(expand(res.x), order, q, alpha_transform)
    theta = _newton_polish(y, theta, init, free)
    g = score(y, theta, init)[free]
    ok = bool(np.all(np.isfinite(g)) and np.linalg.norm(g) < 1e-4 * n)
    return theta, res, ok


def fit_direct_ml(y, q, order, start: ParamVector | None = None, init=None,
                  alpha_transform="log", max_iter=2000) -> FitReport:
    """Maximize the observed log-likelihood directly.

    ``alpha_transform='log'`` optimizes over ``log alpha``; ``'identity'``
    optimizes over ``alpha`` with a positivity bound.  ``lam`` is boxed to
    ``[-50, 50]``.  A short Newton polish on the analytic Hessian follows the
    quasi-Newton run; ``converged`` requires ``|score| < 1e-4 n``.
    """
    y = as_series(y)
    order = _check_order(order)
    theta0 = start if start is not None else starting_values(y, q, order, init=init)
    if not np.isfinite(loglik(y, theta0, init)):
        raise FitError("log-likelihood is not finite at the starting point")
    theta, res, ok = _maximize(y, theta0, init, alpha_transform=alpha_transform, max_iter=max_iter)
    msg = "" if ok else f"score norm above tolerance ({res.message})"
    return _report(y, theta, init, "direct_ml", "skew_qbs", res.nit, ok,
                   [loglik(y, theta0, init), loglik(y, theta, init)], msg)


# ------------------------------------------------------- starting values


def _generic_start(y, order, q, alpha, lam):
    r, s = order
    rho = tuple([0.8 / r] * r) if r else ()
    sig = tuple([0.05 / s] * s) if s else ()
    med = float(np.median(y))
    mean_ratio = float(np.mean(y)) / med
    L = log_eta_derivs(alpha, lam, q)[0]
    # stationary level: psi = log(median) mapped to level q
    psi_bar = math.log(med) + 2.0 * L - math.log(4.0)
    varpi = (1.0 - sum(rho)) * psi_bar - sum(sig) * mean_ratio * math.exp(math.log(med) - psi_bar)
    return ParamVector(alpha, varpi, rho, sig, lam, q)


def _pilot_alpha(y):
    ratio = float(np.mean(y)) / float(np.median(y))
    return math.sqrt(max(2.0 * (ratio - 1.0), 0.04))


def fit_bs_pilot(y, order, init=None):
    """The ``lam = 0``, ``q = 0.5`` model fitted by direct ML."""
    start = _generic_start(y, order, 0.5, _pilot_alpha(y), 0.0)
    theta, res, ok = _maximize(y, start, init, pin_lambda=True)
    return theta, ok


def starting_values(y, q, order, init=None) -> ParamVector:
    """Deterministic start for the skew-QBS fit.

    A BS-ACD pilot (``lam = 0``, ``q = 0.5``) is fitted first.  ``lam0`` is
    ``+0.1`` or ``-0.1`` according to the sign of the sample skewness of
    the pilot's normal-scale residuals ``a_t``; the pilot's path is then
    carried to level ``q`` exactly by :func:`change_level`.
    """
    y = as_series(y)
    order = _check_order(order)
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if y.size < 30:
        raise ValueError("starting values need at least 30 observations")
    try:
        with np.errstate(all="ignore"):
            pilot, _ = fit_bs_pilot(y, order, init)
            a, _ = _a_path(y, pilot, init)
        skew = float(stats.skew(a))
        lam0 = 0.1 if skew >= 0.0 else -0.1
        # keep the BS-scale path of the pilot: alpha unchanged, eta moves
        L_pilot = log_eta_derivs(pilot.alpha, 0.0, 0.5)[0]
        L_new = log_eta_derivs(pilot.alpha, lam0, q)[0]
        theta = pilot.replace(lam=lam0, q=q)
        if _init(init).xi is None:
            theta = shift_level(theta, 2.0 * (L_new - L_pilot))
        if np.isfinite(loglik(y, theta, init)):
            return theta
    except (ExplosivePathError, ValueError, FloatingPointError, np.linalg.LinAlgError):
        pass
    r, s = order
    return ParamVector(1.0, math.log(float(np.quantile(y, q))),
                       tuple([0.5 / r] * r) if r else (), tuple([0.05 / s] * s) if s else (),
                       0.01, q)


# ------------------------------------------------------------ profile q


@dataclass
class ProfileResult:
    q_star: float
    q_grid: np.ndarray
    loglik: np.ndarray
    fits: list
    errors: dict


def profile_q(y, order, q_grid, method="ml", config: EcmConfig = EcmConfig(), init=None):
    """Fit at every ``q`` in the grid and pick the maximizer of the log-likelihood.

    The grid is visited in ascending order; each fit starts from the previous
    solution carried to the new level by :func:`change_level`.  Failed levels
    are recorded in ``errors`` with ``nan`` log-likelihood.
    """
    y = as_series(y)
    order = _check_order(order)
    grid = np.asarray(q_grid, dtype=float).ravel()
    if grid.size == 0 or np.any((grid <= 0.0) | (grid >= 1.0)):
        raise ValueError("q grid must be nonempty and inside (0, 1)")
    idx = np.argsort(grid, kind="stable")
    lls = np.full(grid.size, np.nan)
    fits = [None] * grid.size
    errors = {}
    prev = None
    for i in idx:
        q = float(grid[i])
        try:
            if prev is not None and _init(init).xi is None:
                start = change_level(prev, q)
            else:
                start = starting_values(y, q, order, init=init)
            if method == "ecm":
                rep = fit_ecm(y, q, order, config, start=start, init=init)
            else:
                rep = fit_direct_ml(y, q, order, start=start, init=init)
            fits[i] = rep
            lls[i] = rep.loglik
            prev = rep.theta_hat
        except (FitError, ExplosivePathError, ValueError, FloatingPointError,
                np.linalg.LinAlgError) as exc:
            errors[q] = str(exc)
    if np.all(np.isnan(lls)):
        raise FitError("every level in the q grid failed")
    best = int(np.nanargmax(lls))
    return ProfileResult(float(grid[best]), grid, lls, fits, errors)


# ----------------------------------------------------------- baselines


def _baseline_terms(model, y, psi, shape):
    """Per-t log density and its derivatives in ``psi`` and in the shape parameters."""
    if model == "exp_acd":
        z = y * np.exp(-psi)
        return -psi - z, -1.0 + z, np.zeros((y.size, 0))
    alpha, xi = shape
    lz = np.log(y) - psi
    zx = np.exp(xi * lz)
    logf = (math.log(xi) + (xi * alpha - 1.0) * np.log(y) - zx - xi * alpha * psi
            - special.gammaln(alpha))
    d_psi = xi * zx - xi * alpha
    d_alpha = xi * lz - special.digamma(alpha)
    d_xi = 1.0 / xi + alpha * lz - zx * lz
    return logf, d_psi, np.column_stack([d_alpha, d_xi])


def baseline_survival(model, y, psi, shape=()):
    """``P(Y > y)`` under the EXP or GG conditional law with location ``exp(psi)``."""
    if model == "exp_acd":
        return np.exp(-y * np.exp(-psi))
    alpha, xi = shape
    return special.gammaincc(alpha, np.exp(xi * (np.log(y) - psi)))


def baseline_logsurvival(model, y, psi, shape=()):
    if model == "exp_acd":
        return -y * np.exp(-psi)
    return np.log(baseline_survival(model, y, psi, shape))


def _baseline_split(model, v, order):
    r, s = order
    ns = 0 if model == "exp_acd" else 2
    shape = tuple(np.exp(v[:ns]))
    dyn = v[ns:]
    return shape, dyn[0], dyn[1:1 + r], dyn[1 + r:1 + r + s]


def _baseline_loglik_grad(model, y, v, order, psi0, y0):
    shape, varpi, rho, sigma = _baseline_split(model, v, order)
    psi, ok = _kernels.psi_path(y, varpi, rho, sigma, psi0, y0)
    if not ok:
        return -np.inf, None
    logf, d_psi, d_shape = _baseline_terms(model, y, psi, shape)
    total = float(np.sum(logf))
    if not np.isfinite(total):
        return -np.inf, None
    D, _ = _kernels.psi_derivatives(y, psi, rho, sigma, psi0, y0, False)
    g_dyn = d_psi @ D[:, :-1]
    g_shape = d_shape.sum(axis=0) * np.asarray(shape)  # log-shape chain rule
    return total, np.concatenate([g_shape, g_dyn])


def _fit_other_baseline(y, model, order, start):
    r, s = order
    psi0 = math.log(float(np.mean(y)))
    y0 = float(np.mean(y))
    rho = [0.8 / r] * r if r else []
    sig = [0.05 / s] * s if s else []
    varpi = (1.0 - sum(rho)) * psi0 - sum(sig)
    if model == "exp_acd":
        v0 = np.array([varpi, *rho, *sig])
        names = ["varpi"] + [f"rho{j}" for j in range(1, r + 1)] + [f"sigma{j}" for j in range(1, s + 1)]
    else:
        v0 = np.array([0.0, 0.0, varpi, *rho, *sig])
        names = (["alpha", "xi", "varpi"] + [f"rho{j}" for j in range(1, r + 1)]
                 + [f"sigma{j}" for j in range(1, s + 1)])
    if start is not None:
        v0 = np.asarray(start, dtype=float).copy()
        if model == "gg_acd":
            v0[:2] = np.log(v0[:2])
    n = y.size

    def fun(v):
        ll, g = _baseline_loglik_grad(model, y, v, order, psi0, y0)
        if not np.isfinite(ll) or g is None or not np.all(np.isfinite(g)):
            return 1e10, np.zeros_like(v)
        return -ll / n, -g / n

    res = optimize.minimize(fun, v0, jac=True, method="L-BFGS-B",
                            options={"maxiter": 3000, "ftol": 1e-15, "gtol": 1e-10})
    v = res.x
    ll, g = _baseline_loglik_grad(model, y, v, order, psi0, y0)
    est = v.copy()
    ns = 0 if model == "exp_acd" else 2
    est[:ns] = np.exp(v[:ns])
    # SEs on the natural scale from a central-difference Jacobian of the analytic score
    def grad_natural(e):
        w = e.copy()
        w[:ns] = np.log(e[:ns])
        _, gg = _baseline_loglik_grad(model, y, w, order, psi0, y0)
        if gg is None:
            return np.full(e.size, np.nan)
        gg = gg.copy()
        gg[:ns] /= e[:ns]
        return gg
    k = est.size
    H = np.empty((k, k))
    for i in range(k):
        h = 1e-5 * max(1.0, abs(est[i]))
        ep, em = est.copy(), est.copy()
        ep[i] += h
        em[i] -= h
        H[:, i] = (grad_natural(ep) - grad_natural(em)) / (2.0 * h)
    H = 0.5 * (H + H.T)
    msg = ""
    try:
        cov = np.linalg.inv(np.linalg.cholesky(-H))
        se = np.sqrt(np.sum(cov * cov, axis=0))
    except np.linalg.LinAlgError:
        se = np.full(k, np.nan)
        msg = "observed information not positive definite"
    ok = bool(g is not None and np.linalg.norm(g) < 1e-4 * n)
    if not ok:
        msg = (msg + "; " if msg else "") + f"score norm above tolerance ({res.message})"
    aic, bic = information_criteria(ll, k, n)
    return FitReport(model=model, method="direct_ml", order=order, q=None, names=names,
                     estimates=est, se=se, loglik=float(ll), aic=aic, bic=bic, n=n,
                     iterations=int(res.nit), converged=ok, loglik_trace=np.array([ll]),
                     theta_hat=None, message=msg)


def baseline_path(report: FitReport, y):
    """Location path ``exp(psi_t)`` of a fitted EXP or GG baseline, with its shape tuple."""
    y = as_series(y)
    r, s = report.order
    ns = 0 if report.model == "exp_acd" else 2
    est = report.estimates
    shape = tuple(est[:ns])
    varpi, rho, sigma = est[ns], est[ns + 1:ns + 1 + r], est[ns + 1 + r:ns + 1 + r + s]
    psi, ok = _kernels.psi_path(y, float(varpi), np.ascontiguousarray(rho),
                                np.ascontiguousarray(sigma), math.log(float(np.mean(y))),
                                float(np.mean(y)))
    if not ok:
        raise ExplosivePathError("baseline location path exploded")
    return psi, shape


def fit_baseline(y, model, order, start=None, init=None) -> FitReport:
    """Fit a baseline ACD model by quasi-Newton ML.

    ``exp_acd``: exponential with mean ``psi_t``.  ``gg_acd``: generalized
    gamma ``xi y^(xi alpha - 1) exp(-(y/theta_t)^xi) / (theta_t^(xi alpha) Gamma(alpha))``.
    ``bs_acd``: the skew-QBS model with ``lam = 0`` and ``q = 0.5``.
    All share the log-linear recursion on their location.  For the EXP and GG
    models pre-sample location and duration are ``mean(y)``.
    """
    y = as_series(y)
    order = _check_order(order)
    if model == "bs_acd":
        if start is None:
            theta0 = _generic_start(y, order, 0.5, _pilot_alpha(y), 0.0)
        else:
            theta0 = start.replace(lam=0.0, q=0.5)
        theta, res, _ = _maximize(y, theta0, init, pin_lambda=True)
        g = score(y, theta, init)[:-1]
        ok = bool(np.linalg.norm(g) < 1e-4 * y.size)
        rep = _report(y, theta, init, "direct_ml", "bs_acd", res.nit, ok,
                      [loglik(y, theta0, init), loglik(y, theta, init)],
                      "" if ok else f"score norm above tolerance ({res.message})",
                      pinned_lambda=True)
        return rep
    if model in ("exp_acd", "gg_acd"):
        return _fit_other_baseline(y, model, order, start)
    raise ValueError(f"unknown baseline model {model!r}")
