"""Fixed feature schema and the per-window feature extractor.

Straight-road windows carry 243 features in five groups (kinematics and
temporal descriptors 109, lane 15, interaction 104, safety 6, behaviour 9).
Ramp windows add 21 ramp-geometry features for 264 in total.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import IoFailure, SchemaMismatch, TooFewFrames, ValidationError
from .context import BEHAVIOR_NAMES, RAMP_NAMES, SAFETY_NAMES, behavioral_features, ramp_features, safety_features
from .interaction import DEFAULT_EPS, INTERACTION_NAMES, NeighborStats, interaction_features, resolve_neighbors
from .kinematics import (
    DESCRIPTORS,
    EVENT_DESCRIPTORS,
    INSTANT,
    ROLL_STATS,
    ROLLED,
    event_descriptors,
    kinematics_features,
    temporal_descriptors,
)
from .lane import LANE_NAMES, continuous_offset, lane_features

TEMPORAL_SERIES = (
    "speed",
    "accel_mag",
    "lat_velocity",
    "lateral_offset",
    "yaw_rate",
    "x_acceleration",
    "y_acceleration",
)
KINEMATIC_NAMES = (
    INSTANT
    + tuple(f"roll_{s}_{st}" for s in ROLLED for st in ROLL_STATS)
    + tuple(f"{s}_{d}" for s in TEMPORAL_SERIES for d in DESCRIPTORS)
    + EVENT_DESCRIPTORS
)
GROUPS = {
    "kinematics": KINEMATIC_NAMES,
    "lane": LANE_NAMES,
    "interaction": INTERACTION_NAMES,
    "safety": SAFETY_NAMES,
    "behavior": BEHAVIOR_NAMES,
}
SCHEMA_STRAIGHT = KINEMATIC_NAMES + LANE_NAMES + INTERACTION_NAMES + SAFETY_NAMES + BEHAVIOR_NAMES
SCHEMA_RAMP = SCHEMA_STRAIGHT + RAMP_NAMES

assert len(SCHEMA_STRAIGHT) == 243 and len(set(SCHEMA_STRAIGHT)) == 243
assert len(SCHEMA_RAMP) == 264 and len(set(SCHEMA_RAMP)) == 264


def schema_for(kind: str) -> tuple:
    if kind == "straight":
        return SCHEMA_STRAIGHT
    if kind == "ramp":
        return SCHEMA_RAMP
    raise ValidationError(f"unknown dataset kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Named feature values with an explicit missing mask.

    ``values`` is finite everywhere; slots flagged in ``missing`` hold 0.0 and
    must not be read as data.
    """

    kind: str
    values: np.ndarray
    missing: np.ndarray

    @property
    def names(self) -> tuple:
        return schema_for(self.kind)

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        """Values with missing slots set to NaN, the model-input encoding."""
        return np.where(self.missing, np.nan, self.values)

    def get(self, name: str) -> Optional[float]:
        i = self.names.index(name)
        return None if self.missing[i] else float(self.values[i])

    def to_dict(self) -> dict:
        return {n: (None if m else float(v)) for n, v, m in zip(self.names, self.values, self.missing)}

    def equals(self, other: "FeatureVector") -> bool:
        return (
            self.kind == other.kind
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values)
        )


def assemble(groups, kind: str) -> FeatureVector:
    """Merge group outputs into the fixed schema order for ``kind``.

    Non-finite values become missing. Extra or absent names raise
    :class:`SchemaMismatch`.
    """
    names = schema_for(kind)
    merged: dict = {}
    for g in groups:
        merged.update(g)
    if set(merged) != set(names):
        extra = sorted(set(merged) - set(names))
        absent = sorted(set(names) - set(merged))
        raise SchemaMismatch(f"extra={extra[:5]} absent={absent[:5]}")
    raw = np.array([np.nan if merged[n] is None else float(merged[n]) for n in names])
    missing = ~np.isfinite(raw)
    values = np.where(missing, 0.0, raw)
    return FeatureVector(kind=kind, values=values, missing=missing)


def featurize_window(
    rec,
    track,
    row: int,
    history_steps: int,
    stats: NeighborStats,
    events=(),
    eps: float = DEFAULT_EPS,
) -> FeatureVector:
    """Features of the history window ending at row ``row`` of ``track``.

    Only rows ``row - history_steps + 1 .. row`` of the ego track, neighbour
    rows at the anchor frame and the one before, and events that ended by the
    anchor are read.
    """
    if history_steps < 2:
        raise TooFewFrames("history window needs at least two frames")
    lo = row - history_steps + 1
    if lo < 0:
        raise TooFewFrames(f"row {row} has fewer than {history_steps} frames of history")
    f_s = rec.sampling_rate
    win = track.window(lo, row + 1)
    anchor = int(track.frame[row])

    speed = np.hypot(win.x_velocity, win.y_velocity)
    heading = np.unwrap(np.arctan2(win.y_velocity, win.x_velocity))
    series = {
        "speed": speed,
        "accel_mag": np.hypot(win.x_acceleration, win.y_acceleration),
        "lat_velocity": win.lat_velocity,
        "lateral_offset": continuous_offset(win, f_s),
        "yaw_rate": np.diff(heading) * f_s,
        "x_acceleration": win.x_acceleration,
        "y_acceleration": win.y_acceleration,
    }
    kin = kinematics_features(win, f_s)
    kin.update(temporal_descriptors(series, f_s))
    kin.update(event_descriptors(win, f_s))

    nbrs, prev_nbrs = resolve_neighbors(rec, track, row)
    inter = interaction_features(
        track.frame_at(row),
        nbrs,
        stats,
        eps=eps,
        f_s=f_s,
        prev_frame=track.frame_at(row - 1),
        prev_neighbors=prev_nbrs,
    )
    done = sum(1 for e in events if e.track_id == track.track_id and e.end_frame <= anchor)
    lead = nbrs.get("Lead")
    lead_speed = None if lead is None else float(np.hypot(lead.x_velocity, lead.y_velocity))
    beh = behavioral_features(win, rec.speed_limit, done, (row + 1) / f_s, lead_speed)

    groups = [kin, lane_features(win, f_s), inter, safety_features(win), beh]
    if rec.dataset_kind == "ramp":
        groups.append(ramp_features(win, f_s))
    return assemble(groups, rec.dataset_kind)


def stack(vectors) -> np.ndarray:
    """Model-input matrix, NaN where missing."""
    if not vectors:
        raise ValidationError("no feature vectors to stack")
    return np.vstack([v.as_array() for v in vectors])


def write_feature_csv(path, vectors, kind: str, keys=None, key_names=()) -> None:
    """Comma-separated matrix with the schema names as header; missing is an empty field.

    ``keys`` optionally prefixes each row with identifying columns named ``key_names``.
    """
    names = schema_for(kind)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(key_names) + list(names))
            for i, v in enumerate(vectors):
                cells = ["" if m else repr(float(x)) for x, m in zip(v.values, v.missing)]
                prefix = [str(k) for k in keys[i]] if keys is not None else []
                w.writerow(prefix + cells)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_feature_csv(path, kind: str, n_keys: int = 0) -> tuple:
    """Inverse of :func:`write_feature_csv`; returns ``(keys, vectors)``."""
    names = schema_for(kind)
    keys, vectors = [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            if tuple(header[n_keys:]) != names:
                raise SchemaMismatch(f"{path}: header does not match the {kind} schema")
            for row in r:
                keys.append(row[:n_keys])
                cells = row[n_keys:]
                missing = np.array([c == "" for c in cells])
                values = np.array([0.0 if c == "" else float(c) for c in cells])
                vectors.append(FeatureVector(kind=kind, values=values, missing=missing))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return keys, vectors
