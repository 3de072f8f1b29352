"""Command-line interface.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are the
long flag names, with dashes or underscores).  Values from the file replace
the built-in defaults and explicit flags replace both.  ``QBSACD_OUT`` sets
the default output directory.

Exit status: 0 on success, 1 when a model fails (explosive path, failed or
unconverged fit), 2 for input or configuration errors.  Failures print a
JSON object to stderr and, when possible, write it to ``error.json`` in the
output directory.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .acd import ExplosivePathError, ParamVector
from .diagnostics import (forecast_quantile, gcs_residuals, ljung_box, qq_envelope,
                          residual_summary)
from .estimate import (EcmConfig, FitError, FitReport, baseline_path, fit_baseline,
                       fit_direct_ml, fit_ecm, profile_q, starting_values)
from .ingest import IngestError, describe, diurnal_adjust, load_events
from .mcstudy import (McDesign, run_study, simulate_series, summarize_parameters,
                      summarize_residuals, write_table1_csv, write_table2_csv)

OUT_ENV = "QBSACD_OUT"

DEFAULTS = {
    "input": None,
    "q": 0.5,
    "order": "1,1",
    "model": "skew_qbs",
    "method": "ecm",
    "epsilon": 1e-6,
    "max_iter": 500,
    "seed": 12345,
    "out": None,
    "plots": False,
    "diurnal": False,
    "knot_spacing": 1800.0,
    "qq_reps": 100,
    "grid": "0.01:0.99:0.01",
    "n": 1000,
    "alpha": 0.5,
    "varpi": 0.2,
    "rho": "0.7",
    "sigma": "0.1",
    "lam": -0.5,
    "burn_in": 100,
    "reps": 200,
    "sizes": "500,1000,2000",
    "q_levels": "0.5",
    "workers": 1,
    "split": 2.0 / 3.0,
    "mode": "out_of_sample",
}

MODELS = {"skew_qbs": None, "bs": "bs_acd", "exp": "exp_acd", "gg": "gg_acd"}


class ConfigError(ValueError):
    """Invalid command-line or config-file settings."""


class ModelFailure(RuntimeError):
    """A fit ran but did not converge."""


# ------------------------------------------------------------ parsing


def _add_common(p):
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--input", help="CSV with a 'timestamp' or 'duration' column")
    p.add_argument("--q", type=float, help="quantile level in (0, 1)")
    p.add_argument("--order", help="model order R,S")
    p.add_argument("--model", choices=sorted(MODELS))
    p.add_argument("--method", choices=["ecm", "ml"])
    p.add_argument("--epsilon", type=float, help="ECM tolerance on log-likelihood increase")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--plots", action="store_const", const=True, help="write SVG figures")
    p.add_argument("--diurnal", action="store_const", const=True,
                   help="divide out the time-of-day factor (timestamp input only)")
    p.add_argument("--knot-spacing", dest="knot_spacing", type=float, help="diurnal bin width, seconds")


def _add_theta(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--varpi", type=float)
    p.add_argument("--rho", help="comma-separated rho coefficients")
    p.add_argument("--sigma", help="comma-separated sigma coefficients")
    p.add_argument("--lam", type=float, help="skewness parameter lambda")
    p.add_argument("--burn-in", dest="burn_in", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="qbsacd", description="Skew-QBS-ACD duration models")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fit", help="fit a model and write a report")
    _add_common(p)
    p.add_argument("--qq-reps", dest="qq_reps", type=int)
    p = sub.add_parser("profile-q", help="profile the log-likelihood over q")
    _add_common(p)
    p.add_argument("--grid", help="START:STOP:STEP or a comma-separated list")
    p = sub.add_parser("simulate", help="simulate a duration series")
    _add_common(p)
    _add_theta(p)
    p.add_argument("--n", type=int)
    p = sub.add_parser("mc", help="Monte Carlo parameter and residual study")
    _add_common(p)
    _add_theta(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--q-levels", dest="q_levels", help="comma-separated q levels")
    p.add_argument("--workers", type=int)
    p = sub.add_parser("forecast", help="in-sample or out-of-sample quantile forecasts")
    _add_common(p)
    p.add_argument("--split", type=float, help="estimation fraction")
    p.add_argument("--mode", choices=["in_sample", "out_of_sample"])
    p = sub.add_parser("diagnose", help="residual diagnostics of a fit")
    _add_common(p)
    p.add_argument("--qq-reps", dest="qq_reps", type=int)
    p = sub.add_parser("describe", help="descriptive statistics of the durations")
    _add_common(p)
    return parser


def resolve_config(args):
    """Merge built-in defaults, the config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in data.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[k] = val
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    cfg["command"] = args.command
    if cfg["out"] is None:
        cfg["out"] = os.environ.get(OUT_ENV, ".")
    _validate(cfg)
    return cfg


def _floats(text, name):
    if isinstance(text, (list, tuple)):
        vals = list(text)
    elif isinstance(text, (int, float)):
        vals = [text]
    else:
        vals = [t for t in str(text).split(",") if t.strip()]
    try:
        return tuple(float(v) for v in vals)
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers, got {text!r}") from None


def parse_order(text):
    vals = _floats(text, "order")
    if len(vals) != 2 or any(v != int(v) or v < 0 for v in vals):
        raise ConfigError(f"order must be two nonnegative integers R,S, got {text!r}")
    return int(vals[0]), int(vals[1])


def parse_grid(text):
    if isinstance(text, str) and ":" in text:
        parts = _floats(text.replace(":", ","), "grid")
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"grid must be START:STOP:STEP, got {text!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = np.round(start + step * np.arange(count), 12)
    else:
        grid = np.array(_floats(text, "grid"))
    if grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise ConfigError("grid values must lie in (0, 1)")
    return grid


def _validate(cfg):
    if not 0.0 < float(cfg["q"]) < 1.0:
        raise ConfigError(f"q must lie in (0, 1), got {cfg['q']}")
    cfg["order"] = parse_order(cfg["order"])
    if not float(cfg["epsilon"]) > 0:
        raise ConfigError("epsilon must be positive")
    if int(cfg["max_iter"]) < 1:
        raise ConfigError("max-iter must be at least 1")
    if cfg["model"] not in MODELS:
        raise ConfigError(f"unknown model {cfg['model']!r}")
    if cfg["method"] not in ("ecm", "ml"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    if int(cfg["reps"]) < 1:
        raise ConfigError("reps must be at least 1")
    if not 0.0 < float(cfg["split"]) < 1.0:
        raise ConfigError("split must lie in (0, 1)")
    if int(cfg["qq_reps"]) < 19:
        raise ConfigError("qq-reps must be at least 19")
    if cfg["command"] in ("fit", "profile-q", "forecast", "diagnose", "describe") and not cfg["input"]:
        raise ConfigError(f"{cfg['command']} needs --input")


# ------------------------------------------------------------ helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _outdir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_durations(cfg):
    ev = load_events(cfg["input"])
    info = {"source": ev.source, "dropped_nonpositive_gaps": ev.dropped, "n_raw": int(ev.durations.size)}
    if cfg["diurnal"]:
        adj = diurnal_adjust(ev, float(cfg["knot_spacing"]))
        info["diurnal_knots"] = adj.knots
        info["diurnal_factor"] = adj.factor_at_knots
        return adj.adjusted, info
    return ev.durations, info


def _theta_from_cfg(cfg):
    rho = _floats(cfg["rho"], "rho")
    sigma = _floats(cfg["sigma"], "sigma")
    return ParamVector(float(cfg["alpha"]), float(cfg["varpi"]), rho, sigma, float(cfg["lam"]),
                       float(cfg["q"]))


def run_fit(y, cfg) -> FitReport:
    order = cfg["order"]
    model = MODELS[cfg["model"]]
    if model is not None:
        return fit_baseline(y, model, order)
    q = float(cfg["q"])
    if cfg["method"] == "ecm":
        config = EcmConfig(epsilon=float(cfg["epsilon"]), max_iter=int(cfg["max_iter"]))
        return fit_ecm(y, q, order, config)
    return fit_direct_ml(y, q, order)


def _location_path(y, rep):
    from .acd import quantile_path
    if rep.theta_hat is not None:
        return quantile_path(y, rep.theta_hat)
    psi, _ = baseline_path(rep, y)
    return np.exp(psi)


def _diagnostics(y, rep, cfg):
    r = gcs_residuals(y, rep)
    dyn = rep.order[0] + rep.order[1]
    lb = {}
    for lag in (4, 16):
        if lag < y.size:
            stat, p = ljung_box(r, lag, dyn)
            lb[f"Q({lag})"] = {"statistic": stat, "p_value": p}
    summ = residual_summary(r)
    band = qq_envelope(r, int(cfg["qq_reps"]), 0.95, np.random.default_rng(int(cfg["seed"])))
    return r, lb, summ, band


def _require_converged(rep):
    if not rep.converged:
        raise ModelFailure(f"fit did not converge: {rep.message}")


# ------------------------------------------------------------ commands


def cmd_fit(cfg):
    y, info = load_durations(cfg)
    out = _outdir(cfg)
    rep = run_fit(y, cfg)
    r, lb, summ, band = _diagnostics(y, rep, cfg)
    report = rep.as_dict()
    report["ljung_box"] = lb
    report["residual_summary"] = dict(zip(("mean", "sd", "skewness", "kurtosis"), summ.as_tuple()))
    report["data"] = info
    write_json(report, out / "fit_report.json")
    loc = _location_path(y, rep)
    write_csv(out / "residuals.csv", ["t", "y", "location", "gcs"],
              [(t + 1, y[t], loc[t], r[t]) for t in range(y.size)])
    if cfg["plots"]:
        from .plots import qq_envelope_svg
        qq_envelope_svg(band, out / "qq_envelope.svg")
    _require_converged(rep)
    return report


def cmd_profile_q(cfg):
    y, _ = load_durations(cfg)
    out = _outdir(cfg)
    grid = parse_grid(cfg["grid"])
    res = profile_q(y, cfg["order"], grid, method=cfg["method"],
                    config=EcmConfig(epsilon=float(cfg["epsilon"]), max_iter=int(cfg["max_iter"])))
    names = ParamVector(1.0, 0.0, (0.0,) * cfg["order"][0], (0.0,) * cfg["order"][1]).names
    rows = []
    for i, q in enumerate(res.q_grid):
        fit = res.fits[i]
        if fit is None:
            rows.append([float(q), "nan"] + ["nan"] * len(names) + ["failed: " + res.errors.get(float(q), "")])
        else:
            rows.append([float(q), fit.loglik] + [float(v) for v in fit.estimates]
                        + ["ok" if fit.converged else "not converged"])
    write_csv(out / "profile_q.csv", ["q", "loglik"] + names + ["status"], rows)
    summary = {"q_star": res.q_star, "grid_size": int(res.q_grid.size), "failures": len(res.errors)}
    write_json(summary, out / "profile_q.json")
    if cfg["plots"]:
        from .plots import profile_svg
        profile_svg(res.q_grid, res.loglik, out / "profile_q.svg")
    return summary


def cmd_simulate(cfg):
    out = _outdir(cfg)
    theta = _theta_from_cfg(cfg)
    y = simulate_series(theta, int(cfg["n"]), np.random.default_rng(int(cfg["seed"])),
                        burn_in=int(cfg["burn_in"]))
    write_csv(out / "durations.csv", ["duration"], [(v,) for v in y])
    return {"n": int(y.size), "path": str(out / "durations.csv")}


def cmd_mc(cfg):
    out = _outdir(cfg)
    theta = _theta_from_cfg(cfg)
    sizes = tuple(int(v) for v in _floats(cfg["sizes"], "sizes"))
    qs = _floats(cfg["q_levels"], "q-levels")
    try:
        design = McDesign(theta, qs, sizes, int(cfg["reps"]), int(cfg["seed"]),
                          int(cfg["burn_in"]), cfg["method"],
                          EcmConfig(epsilon=float(cfg["epsilon"]), max_iter=int(cfg["max_iter"])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = run_study(design, workers=int(cfg["workers"]))
    write_table1_csv(summarize_parameters(result), out / "table1.csv")
    write_table2_csv(summarize_residuals(result), out / "table2.csv")
    return {"table1": str(out / "table1.csv"), "table2": str(out / "table2.csv")}


def cmd_forecast(cfg):
    y, _ = load_durations(cfg)
    out = _outdir(cfg)
    split = float(cfg["split"])
    if cfg["mode"] == "out_of_sample":
        cut = int(math.floor(split * y.size))
        rep = run_fit(y[:cut], cfg)
    else:
        rep = run_fit(y, cfg)
    if rep.theta_hat is None:
        raise ConfigError("forecast supports the skew_qbs and bs models")
    res = forecast_quantile(y, rep.theta_hat, split, cfg["mode"])
    write_csv(out / "forecast.csv", ["t", "y", "xi"],
              [(int(t), v, x) for t, v, x in zip(res.t, res.y, res.xi)])
    summary = {"mode": res.mode, "mse": res.mse, "split": split, "n_evaluated": int(res.t.size),
               "fit": rep.as_dict()}
    write_json(summary, out / "forecast.json")
    print(f"mse={res.mse!r}")
    if cfg["plots"]:
        from .plots import forecast_svg
        forecast_svg(res, out / "forecast.svg")
    _require_converged(rep)
    return summary


def cmd_diagnose(cfg):
    y, _ = load_durations(cfg)
    out = _outdir(cfg)
    rep = run_fit(y, cfg)
    r, lb, summ, band = _diagnostics(y, rep, cfg)
    from scipy import stats
    report = {
        "model": rep.model,
        "residual_summary": dict(zip(("mean", "sd", "skewness", "kurtosis"), summ.as_tuple())),
        "ljung_box": lb,
        "ks_exp1_pvalue": float(stats.kstest(r, "expon").pvalue),
        "envelope_fraction_outside": band.fraction_outside,
        "aic": rep.aic,
        "bic": rep.bic,
        "loglik": rep.loglik,
    }
    write_json(report, out / "diagnostics.json")
    if cfg["plots"]:
        from .plots import qq_envelope_svg
        qq_envelope_svg(band, out / "qq_envelope.svg")
    _require_converged(rep)
    return report


def cmd_describe(cfg):
    ev = load_events(cfg["input"])
    out = _outdir(cfg)
    table = {"raw": describe(ev.durations), "dropped_nonpositive_gaps": ev.dropped}
    if cfg["diurnal"]:
        table["adjusted"] = describe(diurnal_adjust(ev, float(cfg["knot_spacing"])).adjusted)
    write_json(table, out / "describe.json")
    return table


COMMANDS = {
    "fit": cmd_fit,
    "profile-q": cmd_profile_q,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "forecast": cmd_forecast,
    "diagnose": cmd_diagnose,
    "describe": cmd_describe,
}


def _fail(code, exc, cfg):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, FileNotFoundError):
        err["path"] = str(exc.filename) if exc.filename else str(exc).split(": ", 1)[-1]
    text = json.dumps(err)
    print(text, file=sys.stderr)
    if cfg is not None:
        try:
            (_outdir(cfg) / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = None
    try:
        cfg = resolve_config(args)
        result = COMMANDS[cfg["command"]](cfg)
    except (FileNotFoundError, IngestError, ConfigError) as exc:
        return _fail(2, exc, cfg)
    except (FitError, ModelFailure, ExplosivePathError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return _fail(1, exc, cfg)
    except ValueError as exc:
        return _fail(2, exc, cfg)
    print(json.dumps(_clean(result) if cfg["command"] != "mc" else result, sort_keys=True)[:2000])
    return 0


if __name__ == "__main__":
    sys.exit(main())
