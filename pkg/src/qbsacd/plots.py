"""Static SVG figures; each file carries its plotted data as JSON in the SVG metadata."""
from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path, data):
    meta = {"Description": json.dumps(data, separators=(",", ":")), "Date": None}
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def qq_envelope_svg(band, path, title="GCS residuals vs EXP(1)"):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.fill_between(band.theoretical, band.lower, band.upper, color="0.85", label=f"{band.level:.0%} envelope")
    ax.plot(band.theoretical, band.observed, ".", ms=2, color="k", label="observed")
    lim = float(max(band.theoretical[-1], band.observed[-1]))
    ax.plot([0, lim], [0, lim], lw=0.8, color="tab:red")
    ax.set_xlabel("EXP(1) quantile")
    ax.set_ylabel("ordered residual")
    ax.set_title(title)
    ax.legend(loc="upper left")
    _save(fig, path, {
        "theoretical": band.theoretical.tolist(),
        "lower": band.lower.tolist(),
        "upper": band.upper.tolist(),
        "observed": band.observed.tolist(),
        "level": band.level,
    })


def forecast_svg(result, path):
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(result.t, result.y, lw=0.5, color="0.6", label="duration")
    ax.plot(result.t, result.xi, lw=1.0, color="tab:blue", label="conditional quantile")
    ax.set_xlabel("t")
    ax.legend(loc="upper right")
    ax.set_title(f"{result.mode.replace('_', '-')} forecast, MSE {result.mse:.4g}")
    _save(fig, path, {"t": result.t.tolist(), "y": result.y.tolist(), "xi": result.xi.tolist(),
                      "mse": result.mse})


def profile_svg(q, ll, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(q, ll, "o-", ms=3)
    ax.set_xlabel("q")
    ax.set_ylabel("maximized log-likelihood")
    ll = np.asarray(ll, dtype=float)
    _save(fig, path, {"q": list(map(float, q)), "loglik": [None if np.isnan(v) else float(v) for v in ll]})
