"""Monte Carlo harness: simulate skew-QBS-ACD series, refit, tabulate.

Every replication draws from its own generator seeded by
``SeedSequence(base_seed, spawn_key=(cell, rep))``, so results do not
depend on the order in which replications run or on the worker count.
One fit per replication feeds both the parameter table and the
residual table.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .acd import ExplosivePathError, ParamVector, as_series
from .diagnostics import ResidualSummary, gcs_residuals, residual_summary
from .dist import SkewQBS
from .estimate import EcmConfig, FitError, fit_direct_ml, fit_ecm, starting_values


def simulate_series(theta: ParamVector, n, rng, init=None, burn_in=0):
    """Simulate ``n`` durations ``y_t = xi_t * rho_t`` with iid unit-quantile ``rho_t``.

    ``rho_t ~ SkewQBS(alpha, 1, lam, q)``, so ``xi_t`` is the conditional
    100q-th percentile.  Pre-sample log-quantile defaults to
    ``varpi / (1 - sum(rho))`` (``varpi`` when that is not finite or the
    sum is at least 1) with the pre-sample duration equal to its exponential;
    a numeric ``init`` sets both to ``init``.  The first ``burn_in`` draws
    are discarded.
    """
    n = int(n)
    burn_in = int(burn_in)
    if n < 1 or burn_in < 0:
        raise ValueError("n must be positive and burn_in nonnegative")
    rng = np.random.default_rng(rng)
    mult = np.asarray(SkewQBS(theta.alpha, 1.0, theta.lam, theta.q).sample(n + burn_in, rng))
    if init is None:
        denom = 1.0 - sum(theta.rho)
        psi0 = theta.varpi / denom if denom > 0.0 else theta.varpi
        y0 = math.exp(psi0)
    else:
        if not init > 0.0:
            raise ValueError("init must be positive")
        psi0, y0 = math.log(init), float(init)
    y, _, ok = _kernels.simulate_path(mult, float(theta.varpi), np.array(theta.rho, dtype=float),
                                      np.array(theta.sigma, dtype=float), psi0, y0)
    if not ok:
        raise ExplosivePathError("simulated conditional quantile exceeded the representable range")
    return y[burn_in:]


@dataclass(frozen=True)
class McDesign:
    """Replication design.

    ``true_theta`` is used at every level in ``q_levels`` (with ``q``
    replaced) unless ``cell_theta`` maps that level to its own parameters.
    ``common_seed`` gives every replication of a cell the same generator
    seed, which is only useful for checking the aggregation.
    """

    true_theta: ParamVector
    q_levels: tuple = (0.5,)
    sizes: tuple = (2000,)
    replications: int = 200
    base_seed: int = 20240101
    burn_in: int = 100
    method: str = "ecm"
    config: EcmConfig = EcmConfig()
    cell_theta: dict = field(default_factory=dict)
    common_seed: bool = False

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ValueError("replications must be at least 1")
        if any(int(n) < 50 for n in self.sizes):
            raise ValueError("sample sizes must be at least 50")
        if any(not 0.0 < q < 1.0 for q in self.q_levels):
            raise ValueError("q levels must lie in (0, 1)")
        if self.method not in ("ecm", "ml"):
            raise ValueError("method must be 'ecm' or 'ml'")

    def cells(self):
        """``(cell index, q, n, true parameters)`` in table order."""
        out = []
        for q in self.q_levels:
            theta = self.cell_theta.get(q, self.true_theta.replace(q=q))
            for n in self.sizes:
                out.append((len(out), float(q), int(n), theta))
        return out

    def seed(self, cell, rep):
        key = (cell, 0) if self.common_seed else (cell, rep)
        return np.random.SeedSequence(self.base_seed, spawn_key=key)


@dataclass
class Replication:
    cell: int
    rep: int
    estimates: np.ndarray | None
    residuals: ResidualSummary | None
    oracle_residuals: ResidualSummary | None
    ks_pvalue: float
    error: str = ""

    @property
    def ok(self):
        return self.estimates is not None


def _one(design: McDesign, cell, q, n, theta, rep):
    rng = np.random.default_rng(design.seed(cell, rep))
    try:
        y = simulate_series(theta, n, rng, burn_in=design.burn_in)
        oracle = residual_summary(gcs_residuals(y, theta))
        start = starting_values(y, q, theta.order)
        if design.method == "ecm":
            rep_fit = fit_ecm(y, q, theta.order, design.config, start=start)
        else:
            rep_fit = fit_direct_ml(y, q, theta.order, start=start)
        if not rep_fit.converged:
            return Replication(cell, rep, None, None, oracle, math.nan,
                               f"not converged: {rep_fit.message}")
        r = gcs_residuals(y, rep_fit)
        ks = float(stats.kstest(r, "expon").pvalue)
        return Replication(cell, rep, rep_fit.theta_hat.to_array(), residual_summary(r), oracle, ks)
    except (FitError, ExplosivePathError, FloatingPointError, ValueError,
            np.linalg.LinAlgError) as exc:
        return Replication(cell, rep, None, None, None, math.nan, f"{type(exc).__name__}: {exc}")


def _run_task(args):
    return _one(*args)


@dataclass
class StudyResult:
    design: McDesign
    replications: list

    def for_cell(self, cell):
        return [r for r in self.replications if r.cell == cell]


def run_study(design: McDesign, workers=1) -> StudyResult:
    """Simulate and fit every replication of every cell.

    Raises :class:`FitError` if more than half of a cell's replications fail.
    """
    tasks = [(design, c, q, n, th, rep) for c, q, n, th in design.cells()
             for rep in range(int(design.replications))]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reps = list(ex.map(_run_task, tasks, chunksize=4))
    else:
        reps = [_run_task(t) for t in tasks]
    reps.sort(key=lambda r: (r.cell, r.rep))
    result = StudyResult(design, reps)
    for c, q, n, _ in design.cells():
        failed = sum(not r.ok for r in result.for_cell(c))
        if failed > design.replications / 2:
            raise FitError(f"cell q={q}, n={n}: {failed} of {design.replications} replications failed")
    return result


@dataclass(frozen=True)
class EstimatorStats:
    mean: float
    bias: float
    rmse: float
    skewness: float
    kurtosis: float


@dataclass
class McSummary:
    """Table-1 layout: ``stats[(q, n)][parameter]`` plus failure counts per cell."""

    names: list
    stats: dict
    failures: dict
    included: dict


def _estimator_stats(values, truth):
    v = np.asarray(values, dtype=float)
    mean = float(np.mean(v))
    bias = mean - truth
    rmse = math.sqrt(float(np.mean((v - truth) ** 2)))
    d = v - mean
    m2 = float(np.mean(d * d))
    if m2 > 0.0:
        skew = float(np.mean(d ** 3)) / m2 ** 1.5
        kurt = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
    else:
        skew = kurt = math.nan
    return EstimatorStats(mean, bias, rmse, skew, kurt)


def summarize_parameters(result: StudyResult) -> McSummary:
    """Mean, bias, RMSE, skewness and excess kurtosis of each estimator per cell."""
    table, failures, included = {}, {}, {}
    names = None
    for c, q, n, theta in result.design.cells():
        names = theta.names
        ok = [r for r in result.for_cell(c) if r.ok]
        failures[(q, n)] = len(result.for_cell(c)) - len(ok)
        included[(q, n)] = len(ok)
        truth = theta.to_array()
        if not ok:
            table[(q, n)] = {}
            continue
        est = np.array([r.estimates for r in ok])
        table[(q, n)] = {nm: _estimator_stats(est[:, i], truth[i]) for i, nm in enumerate(theta.names)}
    return McSummary(list(names), table, failures, included)


def summarize_residuals(result: StudyResult, oracle=False) -> dict:
    """Replication averages of the residual summaries, keyed by ``(q, n)``.

    ``oracle=True`` uses residuals at the generating parameters instead of
    the fitted ones.
    """
    out = {}
    for c, q, n, _ in result.design.cells():
        rows = [(r.oracle_residuals if oracle else r.residuals) for r in result.for_cell(c)]
        rows = [s for s in rows if s is not None]
        if not rows:
            out[(q, n)] = ResidualSummary(math.nan, math.nan, math.nan, math.nan)
            continue
        arr = np.array([s.as_tuple() for s in rows])
        out[(q, n)] = ResidualSummary(*(float(v) for v in arr.mean(axis=0)))
    return out


def run_parameter_study(design: McDesign, workers=1) -> McSummary:
    return summarize_parameters(run_study(design, workers))


def run_residual_study(design: McDesign, workers=1, oracle=False) -> dict:
    return summarize_residuals(run_study(design, workers), oracle=oracle)


def _fmt(x):
    return repr(float(x))


def write_table1_csv(summary: McSummary, path):
    """Rows ``(parameter, statistic)``; one column per ``(q, n)`` cell; a final failures row."""
    cells = list(summary.stats)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "statistic"] + [f"q={q};n={n}" for q, n in cells])
        for nm in summary.names:
            for stat in ("mean", "bias", "rmse", "skewness", "kurtosis"):
                w.writerow([nm, stat] + [_fmt(getattr(summary.stats[c][nm], stat))
                                         if nm in summary.stats[c] else "nan" for c in cells])
        w.writerow(["all", "failures"] + [summary.failures[c] for c in cells])


def write_table2_csv(table: dict, path):
    """Rows mean, sd, skewness, kurtosis; one column per ``(q, n)`` cell."""
    cells = list(table)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic"] + [f"q={q};n={n}" for q, n in cells])
        for stat in ("mean", "sd", "skewness", "kurtosis"):
            w.writerow([stat] + [_fmt(getattr(table[c], stat)) for c in cells])
