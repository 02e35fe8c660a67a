"""Lateral position relative to the lane and its derivatives."""
from __future__ import annotations

import numpy as np

from .kinematics import ROLLING_S

LANE_NAMES = (
    "lat_offset",
    "dist_left",
    "dist_right",
    "lane_width",
    "lat_offset_norm",
    "d_lat_offset",
    "d_dist_left",
    "d_dist_right",
    "dd_lat_offset",
    "roll_lat_offset_mean",
    "roll_dist_left_mean",
    "roll_dist_right_mean",
    "roll_lat_offset_std",
    "max_abs_lat_offset",
    "cum_abs_lat_disp",
)


def continuous_offset(win, f_s: float) -> np.ndarray:
    """Lateral offset made continuous across lane switches, pinned to the last frame."""
    lat = win.lateral_position(f_s)
    return lat - lat[-1] + win.lateral_lane_offset[-1]


def lane_features(win, f_s: float) -> dict:
    off = continuous_offset(win, f_s)
    dl, dr = win.dist_left_boundary, win.dist_right_boundary
    n = len(off)
    width = dl[-1] + dr[-1]
    k = max(1, int(round(ROLLING_S * f_s)))
    return {
        "lat_offset": off[-1],
        "dist_left": dl[-1],
        "dist_right": dr[-1],
        "lane_width": width,
        "lat_offset_norm": off[-1] / width if width > 0 else None,
        "d_lat_offset": (off[-1] - off[-2]) * f_s if n >= 2 else None,
        "d_dist_left": (dl[-1] - dl[-2]) * f_s if n >= 2 else None,
        "d_dist_right": (dr[-1] - dr[-2]) * f_s if n >= 2 else None,
        "dd_lat_offset": (off[-1] - 2 * off[-2] + off[-3]) * f_s**2 if n >= 3 else None,
        "roll_lat_offset_mean": off[-k:].mean(),
        "roll_dist_left_mean": dl[-k:].mean(),
        "roll_dist_right_mean": dr[-k:].mean(),
        "roll_lat_offset_std": off[-k:].std(),
        "max_abs_lat_offset": np.abs(win.lateral_lane_offset).max(),
        "cum_abs_lat_disp": np.abs(np.diff(off)).sum(),
    }
