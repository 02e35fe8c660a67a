"""Kinematic state and multi-scale temporal descriptors of a history window.

Every function returns a plain ``{name: value}`` dict where ``None`` marks a
value that cannot be computed from the window (too short, zero variance,
division by a near-zero quantity).
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from ..errors import TooFewFrames

LAGS_S = (0.5, 1.0, 1.5, 2.0)
EMA_HALF_LIFE_S = 0.5
ACF_SPAN_S = 0.25
SPECTRAL_CUTOFF_HZ = 1.0
ROLLING_S = 1.0
TTC_THRESHOLDS_S = (3.0, 5.0)

DESCRIPTORS = (
    "lag0.5",
    "lag1.0",
    "lag1.5",
    "lag2.0",
    "ema",
    "ema_slope",
    "autocorr",
    "spectral_ratio",
    "zero_cross_rate",
    "linfit_r2",
    "longest_run",
)
INSTANT = (
    "speed",
    "accel_mag",
    "heading",
    "yaw_rate",
    "curvature_radius",
    "x_velocity",
    "y_velocity",
    "x_acceleration",
    "y_acceleration",
    "lat_velocity",
)
ROLLED = ("speed", "accel_mag", "heading", "lat_velocity")
ROLL_STATS = ("mean", "std", "min", "max")
EVENT_DESCRIPTORS = (
    "ttc_lt3_count",
    "ttc_lt3_duration",
    "ttc_lt5_count",
    "ttc_lt5_duration",
    "cum_lat_energy",
    "time_to_boundary",
)


def _heading(win) -> np.ndarray:
    return np.unwrap(np.arctan2(win.y_velocity, win.x_velocity))


def kinematics_features(win, f_s: float) -> dict:
    """Speed, acceleration magnitude, heading, yaw rate and curvature radius at
    the last frame, plus 1 s rolling mean/std/min/max."""
    if len(win) < 2:
        raise TooFewFrames("kinematics need at least two frames")
    speed = np.hypot(win.x_velocity, win.y_velocity)
    accel = np.hypot(win.x_acceleration, win.y_acceleration)
    heading = _heading(win)
    yaw_rate = (heading[-1] - heading[-2]) * f_s
    out = {
        "speed": speed[-1],
        "accel_mag": accel[-1],
        "heading": heading[-1],
        "yaw_rate": yaw_rate,
        "curvature_radius": speed[-1] / abs(yaw_rate) if abs(yaw_rate) >= 1e-6 else None,
        "x_velocity": win.x_velocity[-1],
        "y_velocity": win.y_velocity[-1],
        "x_acceleration": win.x_acceleration[-1],
        "y_acceleration": win.y_acceleration[-1],
        "lat_velocity": win.lat_velocity[-1],
    }
    k = max(1, int(round(ROLLING_S * f_s)))
    for name, series in zip(ROLLED, (speed, accel, heading, win.lat_velocity)):
        tail = series[-k:]
        out[f"roll_{name}_mean"] = tail.mean()
        out[f"roll_{name}_std"] = tail.std()
        out[f"roll_{name}_min"] = tail.min()
        out[f"roll_{name}_max"] = tail.max()
    return out


def ema(x: np.ndarray, f_s: float) -> np.ndarray:
    alpha = 1.0 - 0.5 ** (1.0 / (EMA_HALF_LIFE_S * f_s))
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * x[0]])
    return y


def _flat(x: np.ndarray) -> np.ndarray:
    """Mean-removed series with float round-off flushed to exact zero."""
    r = x - x.mean()
    r[np.abs(r) <= 1e-12 * (1.0 + np.abs(x).max())] = 0.0
    return r


def series_descriptors(x: np.ndarray, f_s: float) -> dict:
    x = np.asarray(x, dtype=float)
    n = len(x)
    out = {}
    for lag in LAGS_S:
        k = int(round(lag * f_s))
        out[f"lag{lag}"] = x[-1] - x[-1 - k] if n > k else None

    e = ema(x, f_s)
    out["ema"] = e[-1]
    k = max(1, int(round(ACF_SPAN_S * f_s)))
    out["ema_slope"] = (e[-1] - e[-1 - k]) * f_s / k if n > k else None

    r = _flat(x)
    denom = float(np.dot(r, r))
    if n > k + 1 and denom > 0:
        out["autocorr"] = float(np.mean([np.dot(r[:-lag], r[lag:]) / denom for lag in range(1, k + 1)]))
    else:
        out["autocorr"] = None

    if n >= 4 and denom > 0:
        power = np.abs(np.fft.rfft(r)) ** 2
        freqs = np.fft.rfftfreq(n, 1.0 / f_s)
        total = power[1:].sum()
        out["spectral_ratio"] = power[freqs > SPECTRAL_CUTOFF_HZ].sum() / total if total > 0 else None
    else:
        out["spectral_ratio"] = None

    signs = np.sign(r[r != 0])
    crossings = int(np.sum(signs[1:] != signs[:-1]))
    out["zero_cross_rate"] = crossings / ((n - 1) / f_s) if n > 1 else 0.0

    if denom > 0 and n >= 3:
        t = np.arange(n, dtype=float)
        slope, intercept = np.polyfit(t, x, 1)
        resid = x - (slope * t + intercept)
        out["linfit_r2"] = max(0.0, 1.0 - float(np.dot(resid, resid)) / denom)
    else:
        out["linfit_r2"] = 0.0

    out["longest_run"] = _longest_same_sign_run(np.diff(x)) / f_s
    return out


def _longest_same_sign_run(d: np.ndarray) -> int:
    best = run = 0
    prev = 0.0
    for s in np.sign(d):
        if s != 0 and s == prev:
            run += 1
        elif s != 0:
            run = 1
        else:
            run = 0
        prev = s
        best = max(best, run)
    return best


def temporal_descriptors(series: dict, f_s: float) -> dict:
    """The eleven descriptors for every named series, keyed ``<series>_<descriptor>``."""
    out = {}
    for name, x in series.items():
        for d, v in series_descriptors(x, f_s).items():
            out[f"{name}_{d}"] = v
    return out


def _episodes(mask: np.ndarray) -> tuple:
    m = mask.astype(np.int8)
    starts = np.sum(np.diff(np.concatenate(([0], m))) == 1)
    return int(starts), int(m.sum())


def event_descriptors(win, f_s: float) -> dict:
    """TTC-threshold episodes, cumulative lateral energy and time to boundary."""
    out = {}
    ttc = win.ttc
    present = ~np.isnan(ttc)
    for thr in TTC_THRESHOLDS_S:
        below = present & (np.where(present, ttc, np.inf) < thr)
        count, frames = _episodes(below)
        out[f"ttc_lt{thr:g}_count"] = float(count)
        out[f"ttc_lt{thr:g}_duration"] = frames / f_s
    out["cum_lat_energy"] = float(np.sum(win.lat_velocity**2) / f_s)
    v = abs(win.lat_velocity[-1])
    near = min(win.dist_left_boundary[-1], win.dist_right_boundary[-1])
    out["time_to_boundary"] = near / v if v >= 1e-3 and np.isfinite(near) else None
    return out
