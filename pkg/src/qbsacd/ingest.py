"""Reading event files, removing time-of-day seasonality, descriptive tables.

Input CSV files need a header with either a ``timestamp`` column (seconds
since midnight) or a ``duration`` column.  An optional ``day`` column splits
a timestamp file into trading days; durations never span two days.  Other
columns (``price`` for example) are ignored.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import interpolate

from .acd import ParamVector


class IngestError(ValueError):
    """The input file is empty, malformed or unusable."""


@dataclass(frozen=True)
class EventData:
    """Durations with, when available, the time of day at which each one starts."""

    durations: np.ndarray
    start_times: np.ndarray | None
    dropped: int
    source: str


def _parse_float(text, lineno, column, path):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise IngestError(f"{path}: line {lineno}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise IngestError(f"{path}: line {lineno}: column {column!r} is not finite")
    return v


def load_events(path) -> EventData:
    """Read a timestamp or duration CSV.

    Timestamps are first-differenced within each day; zero or negative gaps
    are dropped and counted in ``dropped``.  Decreasing timestamps within a
    day are an error.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: file is empty")
        cols = [h.strip().lower() for h in header]
        rows = [(i, row) for i, row in enumerate(reader, start=2) if any(c.strip() for c in row)]
    if not rows:
        raise IngestError(f"{path}: no data rows")

    def column(name):
        j = cols.index(name)
        out = []
        for lineno, row in rows:
            if len(row) != len(cols):
                raise IngestError(f"{path}: line {lineno}: expected {len(cols)} fields, got {len(row)}")
            out.append(_parse_float(row[j].strip(), lineno, name, path))
        return np.array(out)

    if "timestamp" in cols:
        ts = column("timestamp")
        day = column("day") if "day" in cols else np.zeros(ts.size)
        durs, starts, dropped = [], [], 0
        for k in range(1, ts.size):
            if day[k] != day[k - 1]:
                continue
            gap = ts[k] - ts[k - 1]
            if gap < 0.0:
                raise IngestError(f"{path}: line {rows[k][0]}: timestamp decreases within a day")
            if gap == 0.0:
                dropped += 1
                continue
            durs.append(gap)
            starts.append(ts[k - 1])
        if not durs:
            raise IngestError(f"{path}: no positive durations")
        return EventData(np.array(durs), np.array(starts), dropped, str(path))
    if "duration" in cols:
        d = column("duration")
        bad = np.flatnonzero(d <= 0.0)
        if bad.size:
            raise IngestError(f"{path}: line {rows[bad[0]][0]}: duration must be positive")
        return EventData(d, None, 0, str(path))
    raise IngestError(f"{path}: header needs a 'timestamp' or 'duration' column, got {header}")


@dataclass(frozen=True)
class AdjustedDurations:
    raw: np.ndarray
    adjusted: np.ndarray
    knots: np.ndarray
    factor_at_knots: np.ndarray
    factor_at_events: np.ndarray


def diurnal_adjust(events: EventData, knot_spacing=1800.0) -> AdjustedDurations:
    """Divide out a smooth time-of-day factor.

    Mean durations in bins of ``knot_spacing`` seconds are smoothed with a
    cubic smoothing spline through the bin centres (GCV penalty); empty
    bins are skipped, so their neighbours cover their span.  The factor is
    floored at 1% of its largest knot value and scaled to average 1 over
    the observed part of the day.
    """
    if events.start_times is None:
        raise IngestError("diurnal adjustment needs timestamps")
    y = np.asarray(events.durations, dtype=float)
    tod = np.mod(np.asarray(events.start_times, dtype=float), 86400.0)
    lo = math.floor(tod.min() / knot_spacing) * knot_spacing
    idx = np.floor((tod - lo) / knot_spacing).astype(int)
    nb = int(idx.max()) + 1
    counts = np.bincount(idx, minlength=nb)
    sums = np.bincount(idx, weights=y, minlength=nb)
    keep = counts > 0
    if keep.sum() < 2:
        raise IngestError("diurnal adjustment needs at least two nonempty time-of-day bins")
    centers = lo + (np.arange(nb)[keep] + 0.5) * knot_spacing
    means = sums[keep] / counts[keep]
    if keep.sum() >= 5:
        spline = interpolate.make_smoothing_spline(centers, means)
    else:
        spline = interpolate.UnivariateSpline(centers, means, k=min(3, int(keep.sum()) - 1), s=0)
    floor = 0.01 * float(np.max(means))

    def raw_factor(t):
        return np.maximum(spline(np.clip(t, centers[0], centers[-1])), floor)

    grid = np.linspace(tod.min(), tod.max(), 2001)
    scale = float(np.mean(raw_factor(grid))) if tod.max() > tod.min() else float(raw_factor(tod[:1])[0])
    f_events = raw_factor(tod) / scale
    return AdjustedDurations(y, y / f_events, centers, raw_factor(centers) / scale, f_events)


def describe(y) -> dict:
    """Table-3 style summary.

    Percentiles are type-7 (linear interpolation).  ``sd`` uses ``n - 1``;
    skewness and excess kurtosis use n-denominator moments and are ``nan``
    for a constant series.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("describe needs at least two observations")
    mean = float(np.mean(y))
    sd = float(np.std(y, ddof=1))
    d = y - mean
    m2 = float(np.mean(d * d))
    if m2 > 0.0:
        skew = float(np.mean(d ** 3)) / m2 ** 1.5
        kurt = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
    else:
        skew = kurt = math.nan
    p10, p50, p90 = np.percentile(y, [10, 50, 90])
    return {
        "n": int(y.size),
        "min": float(np.min(y)),
        "p10": float(p10),
        "median": float(p50),
        "p90": float(p90),
        "mean": mean,
        "max": float(np.max(y)),
        "sd": sd,
        "cv_percent": 100.0 * sd / mean if mean != 0.0 else math.nan,
        "skewness": skew,
        "excess_kurtosis": kurt,
    }


def synthetic_ticks(seed=2024, days=2, open_s=9 * 3600.0, close_s=17.5 * 3600.0,
                    theta: ParamVector | None = None):
    """Deterministic tick table ``(day, timestamp, price)`` with a U-shaped intraday pattern.

    Durations follow a skew-QBS-ACD(1, 1) process in intraday-adjusted time,
    stretched by a factor that is high at midday (slow trading) and low at
    the open and close.  About one tick in fifty repeats its predecessor's
    timestamp.
    """
    from .mcstudy import simulate_series

    theta = theta or ParamVector(0.6, 0.05, (0.85,), (0.06,), 1.0, 0.5)
    rng = np.random.default_rng(seed)
    span = close_s - open_s
    rows = []
    price = 100.0
    for day in range(days):
        y = simulate_series(theta, 4000, rng, burn_in=100)
        y = y / np.mean(y) * 15.0
        t = open_s
        k = 0
        rows.append((day, round(t, 3), round(price, 2)))
        while k < y.size:
            u = (t - open_s) / span
            factor = 0.55 + 1.8 * u * (1.0 - u) * 2.0
            t += y[k] * factor
            k += 1
            if t >= close_s:
                break
            price += 0.01 * float(rng.choice([-1.0, 1.0]))
            if rng.random() < 0.02:
                rows.append((day, rows[-1][1], round(price, 2)))
            rows.append((day, round(t, 3), round(price, 2)))
    return rows


def write_ticks(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "timestamp", "price"])
        for day, t, p in rows:
            w.writerow([day, repr(float(t)), repr(float(p))])
