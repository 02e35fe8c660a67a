"""Surrogate safety, driver/vehicle behaviour and ramp-geometry features."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .kinematics import LAGS_S, ROLLING_S

SAFETY_NAMES = ("min_dhw", "min_thw", "min_ttc", "dhw", "thw", "ttc")
BEHAVIOR_NAMES = (
    "is_car",
    "is_truck",
    "lc_count",
    "lc_frequency",
    "speed_limit",
    "speed_limit_ratio",
    "accel_ratio",
    "lead_speed_ratio",
    "speed_mean_ratio",
)
REACH_S = (5.0, 15.0, 30.0)
_RAMP_BASE = ("dist_to_entry", "dist_to_exit", "eta_exit")
RAMP_NAMES = (
    _RAMP_BASE
    + tuple(f"reach_exit_{t:g}s" for t in REACH_S)
    + tuple(f"d_{b}" for b in _RAMP_BASE)
    + tuple(f"roll_{b}_mean" for b in _RAMP_BASE)
    + ("eta_entry",)
    + tuple(f"reach_entry_{t:g}s" for t in REACH_S)
    + tuple(f"dist_to_exit_lag{lag}" for lag in LAGS_S)
    + ("ramp_progress",)
)


def _min_present(x: np.ndarray) -> Optional[float]:
    x = x[~np.isnan(x)]
    return float(x.min()) if len(x) else None


def _last_present(x: np.ndarray) -> Optional[float]:
    return None if np.isnan(x[-1]) else float(x[-1])


def safety_features(win) -> dict:
    """Window minima and anchor values of headway distance, time headway and TTC."""
    out = {}
    for name in ("dhw", "thw", "ttc"):
        out[f"min_{name}"] = _min_present(getattr(win, name))
    for name in ("dhw", "thw", "ttc"):
        out[name] = _last_present(getattr(win, name))
    return out


def behavioral_features(
    win,
    speed_limit: Optional[float],
    completed_changes: int,
    elapsed_s: float,
    lead_speed: Optional[float] = None,
) -> dict:
    """Vehicle class, lane-change habit and speed/acceleration ratios.

    ``completed_changes`` counts lane changes finished by the anchor frame and
    ``elapsed_s`` is the time the vehicle has been observed up to the anchor.
    """
    speed = np.hypot(win.x_velocity, win.y_velocity)
    accel = np.hypot(win.x_acceleration, win.y_acceleration)
    v = float(speed[-1])
    amax = float(accel.max())
    vmean = float(speed.mean())
    return {
        "is_car": 1.0 if win.vehicle_class == "car" else 0.0,
        "is_truck": 1.0 if win.vehicle_class == "truck" else 0.0,
        "lc_count": float(completed_changes),
        "lc_frequency": completed_changes / elapsed_s if elapsed_s > 0 else None,
        "speed_limit": speed_limit,
        "speed_limit_ratio": v / speed_limit if speed_limit else None,
        "accel_ratio": float(accel[-1]) / amax if amax > 1e-9 else None,
        "lead_speed_ratio": v / lead_speed if lead_speed is not None and lead_speed >= 0.1 else None,
        "speed_mean_ratio": v / vmean if vmean >= 0.1 else None,
    }


def ramp_features(win, f_s: float) -> dict:
    """Distances and arrival times to the ramp entry and exit.

    All entries are missing when the track carries no ramp metadata.
    ``eta_exit`` is taken as given, never recomputed from distance and speed.
    """
    if win.ramp is None:
        return dict.fromkeys(RAMP_NAMES)
    out = {}
    series = {b: np.asarray(win.ramp[b], dtype=float) for b in _RAMP_BASE}
    for b, x in series.items():
        out[b] = _last_present(x)
    eta = out["eta_exit"]
    for t in REACH_S:
        out[f"reach_exit_{t:g}s"] = None if eta is None else float(eta <= t)
    for b, x in series.items():
        ok = len(x) >= 2 and not np.isnan(x[-1]) and not np.isnan(x[-2])
        out[f"d_{b}"] = (x[-1] - x[-2]) * f_s if ok else None
    k = max(1, int(round(ROLLING_S * f_s)))
    for b, x in series.items():
        out[f"roll_{b}_mean"] = _mean_present(x[-k:])
    v = float(np.hypot(win.x_velocity[-1], win.y_velocity[-1]))
    d_entry = out["dist_to_entry"]
    eta_entry = d_entry / v if d_entry is not None and v >= 0.1 else None
    out["eta_entry"] = eta_entry
    for t in REACH_S:
        out[f"reach_entry_{t:g}s"] = None if eta_entry is None else float(0.0 <= eta_entry <= t)
    x = series["dist_to_exit"]
    for lag in LAGS_S:
        j = int(round(lag * f_s))
        ok = len(x) > j and not np.isnan(x[-1]) and not np.isnan(x[-1 - j])
        out[f"dist_to_exit_lag{lag}"] = x[-1] - x[-1 - j] if ok else None
    d_exit = out["dist_to_exit"]
    span = None if d_entry is None or d_exit is None else d_exit - d_entry
    out["ramp_progress"] = -d_entry / span if span is not None and span > 0 else None
    return out


def _mean_present(x: np.ndarray) -> Optional[float]:
    x = x[~np.isnan(x)]
    return float(x.mean()) if len(x) else None
