"""In-memory representation of drone-recorded highway trajectories.

Tracks are stored column-wise (one numpy array per signal) because every
consumer downstream works on slices of a track rather than on single frames.
``Track.frame_at`` gives the per-frame view when one is needed.

Coordinate conventions
----------------------
* ``x`` grows along the driving direction.
* lateral quantities (``lat_velocity``, ``lateral_lane_offset``) are
  left-positive.
* absent surrogate-safety values (``dhw``, ``thw``, ``ttc``) are NaN in the
  raw arrays; absent neighbours are ``NO_VEHICLE`` in the id arrays and never
  show up in ``Frame.neighbor_ids``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import EmptyRecording, NonMonotonicFrames, ValidationError

NEIGHBOR_POSITIONS = (
    "Lead",
    "Rear",
    "LeftLead",
    "LeftAlong",
    "LeftRear",
    "RightLead",
    "RightAlong",
    "RightRear",
)
RAMP_FIELDS = ("dist_to_entry", "dist_to_exit", "eta_exit")
VEHICLE_CLASSES = ("car", "truck")
DATASET_KINDS = ("straight", "ramp")
NO_VEHICLE = -1
DEFAULT_SAMPLING_RATE = 25.0

FLOAT_FIELDS = (
    "x",
    "y",
    "x_velocity",
    "y_velocity",
    "x_acceleration",
    "y_acceleration",
    "lat_velocity",
    "lateral_lane_offset",
    "dist_left_boundary",
    "dist_right_boundary",
    "dhw",
    "thw",
    "ttc",
)


@dataclass(frozen=True)
class Frame:
    frame_index: int
    x: float
    y: float
    x_velocity: float
    y_velocity: float
    x_acceleration: float
    y_acceleration: float
    lat_velocity: float
    lane_id: int
    lateral_lane_offset: float
    dist_left_boundary: float
    dist_right_boundary: float
    dhw: Optional[float]
    thw: Optional[float]
    ttc: Optional[float]
    neighbor_ids: dict
    ramp_meta: Optional[dict]


def _opt(v):
    return None if np.isnan(v) else float(v)


@dataclass(frozen=True, eq=False)
class Track:
    track_id: int
    vehicle_class: str
    frame: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_velocity: np.ndarray
    y_velocity: np.ndarray
    x_acceleration: np.ndarray
    y_acceleration: np.ndarray
    lat_velocity: np.ndarray
    lane_id: np.ndarray
    lateral_lane_offset: np.ndarray
    dist_left_boundary: np.ndarray
    dist_right_boundary: np.ndarray
    dhw: np.ndarray
    thw: np.ndarray
    ttc: np.ndarray
    neighbors: dict = field(default_factory=dict)
    ramp: Optional[dict] = None

    def __post_init__(self):
        n = len(self.frame)
        if n < 2:
            raise ValidationError(f"track {self.track_id} has fewer than 2 frames")
        if np.any(np.diff(self.frame) != 1):
            raise NonMonotonicFrames(self.track_id)
        if self.vehicle_class not in VEHICLE_CLASSES:
            raise ValidationError(f"unknown vehicle class {self.vehicle_class!r}")
        for name in FLOAT_FIELDS + ("lane_id",):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"track {self.track_id}: column {name} has wrong length")
        for pos in NEIGHBOR_POSITIONS:
            ids = self.neighbors.get(pos)
            if ids is None:
                self.neighbors[pos] = np.full(n, NO_VEHICLE, dtype=np.int64)
            elif len(ids) != n:
                raise ValidationError(f"track {self.track_id}: neighbor column {pos} has wrong length")
        width = self.dist_left_boundary + self.dist_right_boundary
        if np.any(width[np.isfinite(width)] <= 0):
            raise ValidationError(f"track {self.track_id}: non-positive lane width")
        for name in ("dhw", "thw", "ttc"):
            v = getattr(self, name)
            if np.any(v[~np.isnan(v)] < 0):
                raise ValidationError(f"track {self.track_id}: negative {name}")

    def __len__(self):
        return len(self.frame)

    @property
    def first_frame(self) -> int:
        return int(self.frame[0])

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.x_velocity, self.y_velocity)

    def index_of(self, frame_index: int) -> int:
        """Row offset of ``frame_index`` or -1 when the track does not cover it."""
        i = int(frame_index) - self.first_frame
        return i if 0 <= i < len(self) else -1

    def lateral_position(self, sampling_rate: float) -> np.ndarray:
        """Continuous lateral coordinate built from the lane-relative offset.

        The offset jumps by roughly one lane width whenever ``lane_id``
        changes; across such a step the displacement is bridged with the
        mean lateral velocity of the two frames instead.
        """
        off = self.lateral_lane_offset
        step = np.diff(off)
        changed = self.lane_id[1:] != self.lane_id[:-1]
        if np.any(changed):
            dt = 1.0 / sampling_rate
            bridge = 0.5 * (self.lat_velocity[1:] + self.lat_velocity[:-1]) * dt
            step = np.where(changed, bridge, step)
        return off[0] + np.concatenate(([0.0], np.cumsum(step)))

    def window(self, lo: int, hi: int) -> "Track":
        """Rows ``lo .. hi-1`` as a track of their own (arrays are views)."""
        cols = {name: getattr(self, name)[lo:hi] for name in FLOAT_FIELDS}
        ramp = None if self.ramp is None else {k: v[lo:hi] for k, v in self.ramp.items()}
        return Track(
            track_id=self.track_id,
            vehicle_class=self.vehicle_class,
            frame=self.frame[lo:hi],
            lane_id=self.lane_id[lo:hi],
            neighbors={p: a[lo:hi] for p, a in self.neighbors.items()},
            ramp=ramp,
            **cols,
        )

    def frame_at(self, i: int) -> Frame:
        ids = {pos: int(a[i]) for pos, a in self.neighbors.items() if a[i] != NO_VEHICLE}
        ramp = None
        if self.ramp is not None:
            ramp = {k: float(self.ramp[k][i]) for k in RAMP_FIELDS}
        return Frame(
            frame_index=int(self.frame[i]),
            x=float(self.x[i]),
            y=float(self.y[i]),
            x_velocity=float(self.x_velocity[i]),
            y_velocity=float(self.y_velocity[i]),
            x_acceleration=float(self.x_acceleration[i]),
            y_acceleration=float(self.y_acceleration[i]),
            lat_velocity=float(self.lat_velocity[i]),
            lane_id=int(self.lane_id[i]),
            lateral_lane_offset=float(self.lateral_lane_offset[i]),
            dist_left_boundary=float(self.dist_left_boundary[i]),
            dist_right_boundary=float(self.dist_right_boundary[i]),
            dhw=_opt(self.dhw[i]),
            thw=_opt(self.thw[i]),
            ttc=_opt(self.ttc[i]),
            neighbor_ids=ids,
            ramp_meta=ramp,
        )

    def equals(self, other: "Track", atol: float = 1e-9) -> bool:
        if self.track_id != other.track_id or self.vehicle_class != other.vehicle_class:
            return False
        if len(self) != len(other) or not np.array_equal(self.frame, other.frame):
            return False
        if not np.array_equal(self.lane_id, other.lane_id):
            return False
        for name in FLOAT_FIELDS:
            if not np.allclose(getattr(self, name), getattr(other, name), rtol=0, atol=atol, equal_nan=True):
                return False
        for pos in NEIGHBOR_POSITIONS:
            if not np.array_equal(self.neighbors[pos], other.neighbors[pos]):
                return False
        if (self.ramp is None) != (other.ramp is None):
            return False
        if self.ramp is not None:
            for k in RAMP_FIELDS:
                if not np.allclose(self.ramp[k], other.ramp[k], rtol=0, atol=atol, equal_nan=True):
                    return False
        return True


@dataclass(frozen=True, eq=False)
class Recording:
    recording_id: int
    location_id: int
    sampling_rate: float
    dataset_kind: str
    speed_limit: Optional[float]
    tracks: tuple

    def __post_init__(self):
        if not self.tracks:
            raise EmptyRecording(f"recording {self.recording_id} has no tracks")
        if self.location_id < 0:
            raise ValidationError("location_id must be >= 0")
        if not self.sampling_rate > 0:
            raise ValidationError("sampling_rate must be positive")
        if self.dataset_kind not in DATASET_KINDS:
            raise ValidationError(f"unknown dataset kind {self.dataset_kind!r}")
        ids = [t.track_id for t in self.tracks]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"recording {self.recording_id} has duplicate track ids")
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "_by_id", {t.track_id: t for t in self.tracks})

    def track(self, track_id: int) -> Track:
        return self._by_id[track_id]

    def has_track(self, track_id: int) -> bool:
        return track_id in self._by_id

    def equals(self, other: "Recording", atol: float = 1e-9) -> bool:
        same_meta = (
            self.recording_id == other.recording_id
            and self.location_id == other.location_id
            and abs(self.sampling_rate - other.sampling_rate) <= atol
            and self.dataset_kind == other.dataset_kind
            and (self.speed_limit is None) == (other.speed_limit is None)
            and (self.speed_limit is None or abs(self.speed_limit - other.speed_limit) <= atol)
        )
        if not same_meta or len(self.tracks) != len(other.tracks):
            return False
        return all(a.equals(b, atol) for a, b in zip(self.tracks, other.tracks))
