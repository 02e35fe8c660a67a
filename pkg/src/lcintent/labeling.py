"""Lane-change detection and three-class window labeling.

A lane change starts at the first frame where the vehicle's centre is at least
``crossing_threshold`` away from its lane centreline and keeps drifting the
same way for ``drift_duration``; it ends at the first frame where the centre
sits inside the adjacent lane and no reverse lateral motion follows for
``settle_duration``.

On straight roads the direction comes from the lane ids; on ramp sections,
where ids are not sequential, from the sign of the mean lateral velocity
right after the start.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Optional

import numpy as np

from .data.types import Track
from .errors import MissingLateralData, OutOfRange, SameLane, TrackTooShort, ValidationError


class Direction(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"


class Intent(IntEnum):
    NO_LC = 0
    LEFT_LC = 1
    RIGHT_LC = 2

    @classmethod
    def from_direction(cls, d: Direction) -> "Intent":
        return cls.LEFT_LC if d == Direction.LEFT else cls.RIGHT_LC


CLASS_NAMES = ("NoLC", "LeftLC", "RightLC")


@dataclass(frozen=True)
class LaneChangeEvent:
    track_id: int
    start_frame: int
    end_frame: int
    direction: Direction
    lane_before: int
    lane_after: int

    def __post_init__(self):
        if not self.start_frame < self.end_frame:
            raise ValidationError("event start must precede its end")


@dataclass(frozen=True)
class LabelingParams:
    crossing_threshold: float = 0.2
    drift_duration: float = 0.5
    settle_duration: float = 1.0
    direction_window: float = 0.1
    drift_tolerance: float = 0.02

    def __post_init__(self):
        for name in ("crossing_threshold", "drift_duration", "settle_duration", "direction_window", "drift_tolerance"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")


@dataclass(eq=False)
class LabeledWindow:
    recording_id: int
    track_id: int
    anchor_frame: int
    history_s: float
    horizon_s: float
    sequence: np.ndarray
    label: Intent
    physics_features: Optional[object] = None


# per-frame channels fed to the sequence encoder
SEQUENCE_CHANNELS = (
    "x_velocity",
    "y_velocity",
    "x_acceleration",
    "y_acceleration",
    "lat_velocity",
    "lateral_lane_offset",
    "dist_left_boundary",
    "dist_right_boundary",
)


def steps(seconds: float, rate: float) -> int:
    return int(round(seconds * rate))


def direction_straight(lane_before: int, lane_after: int) -> Direction:
    """Left iff the lane id increases across the change."""
    if lane_before == lane_after:
        raise SameLane(f"lane {lane_before} on both sides of the change")
    return Direction.LEFT if lane_before < lane_after else Direction.RIGHT


def direction_ramp(track: Track, start_frame: int, params: LabelingParams, sampling_rate: float) -> Direction:
    """Sign of the mean lateral velocity over ``direction_window`` from the start."""
    i0 = track.index_of(start_frame)
    if i0 < 0:
        raise OutOfRange(f"frame {start_frame} not in track {track.track_id}")
    i1 = min(len(track) - 1, i0 + int(np.floor(params.direction_window * sampling_rate + 1e-9)))
    mean_v = float(np.mean(track.lat_velocity[i0 : i1 + 1]))
    return Direction.LEFT if mean_v > 0 else Direction.RIGHT


def _no_reversal(lat: np.ndarray, i0: int, n_steps: int, sign: float, tol: float) -> bool:
    seg = np.diff(lat[i0 : i0 + n_steps + 1])
    return len(seg) == n_steps and bool(np.all(sign * seg >= -tol))


def detect_events(
    track: Track,
    params: LabelingParams = LabelingParams(),
    kind: str = "straight",
    sampling_rate: float = 25.0,
) -> list:
    off = track.lateral_lane_offset
    if np.any(~np.isfinite(off)) or np.any(~np.isfinite(track.lat_velocity)):
        raise MissingLateralData(f"track {track.track_id} lacks lateral offsets or velocities")
    lat = track.lateral_position(sampling_rate)
    lanes = track.lane_id
    n = len(track)
    n_drift = max(1, int(np.ceil(params.drift_duration * sampling_rate - 1e-9)))
    n_settle = max(1, int(np.ceil(params.settle_duration * sampling_rate - 1e-9)))
    tol = params.drift_tolerance

    events = []
    k = 0
    while k < n:
        above = np.flatnonzero(np.abs(off[k:]) >= params.crossing_threshold)
        if len(above) == 0:
            break
        s = k + int(above[0])
        sign = 1.0 if off[s] > 0 else -1.0
        drifting = _no_reversal(lat, s, n_drift, sign, tol) and sign * (lat[s + n_drift] - lat[s]) > 0
        if not drifting:
            k = s + 1
            continue
        end = _find_end(lat, lanes, s, sign, n_settle, tol)
        if end is None:
            k = s + 1
            continue
        lane_before, lane_after = int(lanes[s]), int(lanes[end])
        if kind == "straight":
            direction = direction_straight(lane_before, lane_after)
        else:
            direction = direction_ramp(track, int(track.frame[s]), params, sampling_rate)
        events.append(
            LaneChangeEvent(
                track_id=track.track_id,
                start_frame=int(track.frame[s]),
                end_frame=int(track.frame[end]),
                direction=direction,
                lane_before=lane_before,
                lane_after=lane_after,
            )
        )
        k = end + 1
    return events


def _find_end(lat, lanes, s, sign, n_settle, tol) -> Optional[int]:
    n = len(lanes)
    origin = lanes[s]
    m = s + 1
    # the move has to keep going until the lane switch
    while m < n and lanes[m] == origin:
        if sign * (lat[m] - lat[m - 1]) < -tol:
            return None
        m += 1
    if m >= n:
        return None
    target = lanes[m]
    while m < n and lanes[m] == target:
        if _no_reversal(lat, m, n_settle, sign, tol):
            return m
        m += 1
    return None


def label_windows(
    track: Track,
    events: list,
    history_s: float,
    horizon_s: float,
    sampling_rate: float = 25.0,
    stride: int = 1,
    recording_id: int = 0,
) -> list:
    """Cut one window per anchor frame and label it from the upcoming events.

    Anchors sit on a fixed grid starting ``round(W * f_s) - 1`` frames into the
    track. A window is positive when an event starts in ``(anchor, anchor +
    T * f_s]``. Windows whose anchor lies inside an event, or whose history
    already contains an event start, are dropped.
    """
    if not (history_s > 0 and horizon_s > 0):
        raise ValidationError("history and horizon must be positive")
    w = steps(history_s, sampling_rate)
    h = steps(horizon_s, sampling_rate)
    if len(track) < w + h:
        raise TrackTooShort(f"track {track.track_id} has {len(track)} frames, needs {w + h}")
    seq_all = np.column_stack([getattr(track, c) for c in SEQUENCE_CHANNELS])
    starts = np.array([e.start_frame for e in events], dtype=np.int64)
    ends = np.array([e.end_frame for e in events], dtype=np.int64)
    out = []
    for a in window_anchors(len(track), w, h, stride):
        fa = int(track.frame[a])
        in_progress = np.any((starts <= fa) & (ends >= fa))
        started_in_history = np.any((starts > fa - w) & (starts <= fa))
        if in_progress or started_in_history:
            continue
        upcoming = [e for e in events if fa < e.start_frame <= fa + h]
        label = Intent.NO_LC
        if upcoming:
            first = min(upcoming, key=lambda e: e.start_frame)
            label = Intent.from_direction(first.direction)
        out.append(
            LabeledWindow(
                recording_id=recording_id,
                track_id=track.track_id,
                anchor_frame=fa,
                history_s=history_s,
                horizon_s=horizon_s,
                sequence=seq_all[a - w + 1 : a + 1],
                label=label,
            )
        )
    return out


def window_anchors(n_frames: int, w: int, h: int, stride: int) -> range:
    return range(w - 1, n_frames - h, max(1, int(stride)))


def consistency_filter(track: Track, events: list, windows: list, horizon_s: float, sampling_rate: float = 25.0) -> list:
    """Drop windows whose horizon holds two or more event starts."""
    h = steps(horizon_s, sampling_rate)
    starts = np.array([e.start_frame for e in events if e.track_id == track.track_id], dtype=np.int64)
    kept = []
    for win in windows:
        n_in = int(np.sum((starts > win.anchor_frame) & (starts <= win.anchor_frame + h)))
        if n_in < 2:
            kept.append(win)
    return kept


EVENT_COLUMNS = ("recording_id", "track_id", "start_frame", "end_frame", "direction", "lane_before", "lane_after")


def write_events(events_by_recording: dict, path) -> None:
    """Comma-separated event table; ``events_by_recording`` maps recording id to events."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for rid in sorted(events_by_recording):
            for e in events_by_recording[rid]:
                w.writerow([rid, e.track_id, e.start_frame, e.end_frame, e.direction.value, e.lane_before, e.lane_after])


def read_events(path) -> dict:
    out: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ev = LaneChangeEvent(
                track_id=int(row["track_id"]),
                start_frame=int(row["start_frame"]),
                end_frame=int(row["end_frame"]),
                direction=Direction(row["direction"]),
                lane_before=int(row["lane_before"]),
                lane_after=int(row["lane_after"]),
            )
            out.setdefault(int(row["recording_id"]), []).append(ev)
    return out


def detect_recording(rec, params: LabelingParams = LabelingParams()) -> list:
    events = []
    for t in rec.tracks:
        events.extend(detect_events(t, params, rec.dataset_kind, rec.sampling_rate))
    return events
