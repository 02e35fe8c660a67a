"""Gap and relative-motion features toward the eight surrounding vehicles.

Gap statistics per neighbour position are fitted on the vehicles present at
the start of every observed lane change. A gap ``d`` is then expressed as a
z-score ``(d - mu) / sigma``, a ratio ``d / mu`` and a safe-gap indicator
``d > mu + 2 sigma``. The critical gap time ``d / (|dv| + eps)`` measures how
long the gap lasts at the current closing speed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..data.types import NEIGHBOR_POSITIONS, Frame, Recording, Track
from ..errors import IoFailure, ValidationError

DEFAULT_EPS = 1e-6
MIN_EGO_SPEED = 0.1
PER_NEIGHBOR = (
    "lon_gap",
    "lat_gap",
    "dist",
    "dv",
    "da",
    "dvy",
    "approach_rate",
    "z",
    "s",
    "safe_gap",
    "ttg_z",
    "cgt",
)
AGGREGATES = (
    "safe_gap_count",
    "left_adv_lead",
    "left_adv_rear",
    "left_adv_score",
    "right_adv_lead",
    "right_adv_rear",
    "right_adv_score",
    "occupancy",
)
INTERACTION_NAMES = tuple(f"{p}_{f}" for p in NEIGHBOR_POSITIONS for f in PER_NEIGHBOR) + AGGREGATES


@dataclass(frozen=True)
class PositionStats:
    mu: float
    sigma: float
    count: int
    t_mu: Optional[float] = None
    t_sigma: Optional[float] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        if self.count < 1:
            raise ValidationError("count must be at least 1")


@dataclass(frozen=True)
class NeighborStats:
    """Gap distribution per neighbour position; ``None`` where nothing was observed."""

    positions: dict = field(default_factory=dict)

    def get(self, pos: str) -> Optional[PositionStats]:
        return self.positions.get(pos)

    def to_text(self) -> str:
        lines = []
        for pos in NEIGHBOR_POSITIONS:
            st = self.get(pos)
            if st is None:
                lines.append(f"{pos}.count = 0")
                continue
            lines.append(f"{pos}.mu = {st.mu!r}")
            lines.append(f"{pos}.sigma = {st.sigma!r}")
            lines.append(f"{pos}.count = {st.count}")
            if st.t_mu is not None:
                lines.append(f"{pos}.t_mu = {st.t_mu!r}")
                lines.append(f"{pos}.t_sigma = {st.t_sigma!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NeighborStats":
        raw: dict = {}
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, _, value = line.partition("=")
            pos, _, attr = key.strip().partition(".")
            raw.setdefault(pos, {})[attr] = value.strip()
        positions = {}
        for pos, kv in raw.items():
            if int(kv.get("count", 0)) == 0:
                continue
            positions[pos] = PositionStats(
                mu=float(kv["mu"]),
                sigma=float(kv["sigma"]),
                count=int(kv["count"]),
                t_mu=float(kv["t_mu"]) if "t_mu" in kv else None,
                t_sigma=float(kv["t_sigma"]) if "t_sigma" in kv else None,
            )
        return cls(positions)

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_text(), encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "NeighborStats":
        try:
            return cls.from_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def gap(ego, other) -> float:
    """Centre-to-centre Euclidean distance."""
    return float(np.hypot(other.x - ego.x, other.y - ego.y))


def _speed(f) -> float:
    return float(np.hypot(f.x_velocity, f.y_velocity))


def resolve_neighbors(rec: Recording, track: Track, i: int) -> tuple:
    """Neighbour frames at row ``i`` of ``track`` and at the row before.

    Returns ``(now, before)``: two dicts position -> Frame. ``before`` holds a
    position only when the same vehicle was there one frame earlier.
    """
    frame_idx = int(track.frame[i])
    now, before = {}, {}
    for pos in NEIGHBOR_POSITIONS:
        nid = int(track.neighbors[pos][i])
        if nid < 0 or not rec.has_track(nid):
            continue
        other = rec.track(nid)
        j = other.index_of(frame_idx)
        if j < 0:
            continue
        now[pos] = other.frame_at(j)
        if i > 0 and j > 0 and int(track.neighbors[pos][i - 1]) == nid:
            before[pos] = other.frame_at(j - 1)
    return now, before


def event_samples(recordings, events_by_recording: dict, locations=None) -> dict:
    """Per position, ``(gap, dv, ego_speed)`` rows taken at every event start.

    Only recordings whose ``location_id`` is in ``locations`` contribute when
    it is given.
    """
    out: dict = {p: [] for p in NEIGHBOR_POSITIONS}
    for rec in recordings:
        if locations is not None and rec.location_id not in locations:
            continue
        for ev in events_by_recording.get(rec.recording_id, ()):
            if not rec.has_track(ev.track_id):
                continue
            track = rec.track(ev.track_id)
            i = track.index_of(ev.start_frame)
            if i < 0:
                continue
            ego = track.frame_at(i)
            v = _speed(ego)
            nbrs, _ = resolve_neighbors(rec, track, i)
            for pos, nb in nbrs.items():
                out[pos].append((gap(ego, nb), nb.x_velocity - ego.x_velocity, v))
    return out


def fit_neighbor_stats(recordings, events_by_recording: dict, locations=None) -> NeighborStats:
    """Population mean and standard deviation of the gap per position at event starts.

    Pass the training locations as ``locations`` so test data never leaks in.
    """
    samples = event_samples(recordings, events_by_recording, locations)
    positions = {}
    for pos in NEIGHBOR_POSITIONS:
        if not samples[pos]:
            continue
        rows = np.asarray(samples[pos])
        d, v = rows[:, 0], rows[:, 2]
        t = d[v >= MIN_EGO_SPEED] / v[v >= MIN_EGO_SPEED]
        positions[pos] = PositionStats(
            mu=float(d.mean()),
            sigma=float(d.std()),
            count=len(d),
            t_mu=float(t.mean()) if len(t) else None,
            t_sigma=float(t.std()) if len(t) else None,
        )
    return NeighborStats(positions)


def z_score(d: float, st: Optional[PositionStats]) -> Optional[float]:
    if st is None or st.sigma == 0:
        return None
    return (d - st.mu) / st.sigma


def scale_ratio(d: float, st: Optional[PositionStats]) -> Optional[float]:
    if st is None or st.mu == 0:
        return None
    return d / st.mu


def safe_gap(d: float, st: Optional[PositionStats]) -> Optional[float]:
    if st is None:
        return None
    return 1.0 if d > st.mu + 2.0 * st.sigma else 0.0


def critical_gap_time(d: float, dv: float, eps: float = DEFAULT_EPS) -> float:
    return d / (abs(dv) + eps)


def _advantage(side_gap, ego_gap):
    if side_gap is None or ego_gap is None:
        return None
    return side_gap - ego_gap


def interaction_features(
    frame: Frame,
    neighbors: dict,
    stats: NeighborStats,
    eps: float = DEFAULT_EPS,
    f_s: float = 25.0,
    prev_frame: Optional[Frame] = None,
    prev_neighbors: Optional[dict] = None,
) -> dict:
    """Twelve features per neighbour position plus gap-acceptance aggregates."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    prev_neighbors = prev_neighbors or {}
    v_ego = _speed(frame)
    out: dict = {}
    dist: dict = {}
    n_safe = 0.0
    for pos in NEIGHBOR_POSITIONS:
        nb = neighbors.get(pos)
        if nb is None:
            for f in PER_NEIGHBOR:
                out[f"{pos}_{f}"] = None
            continue
        st = stats.get(pos)
        d = gap(frame, nb)
        dist[pos] = d
        dv = nb.x_velocity - frame.x_velocity
        approach = None
        nb_prev = prev_neighbors.get(pos)
        if prev_frame is not None and nb_prev is not None:
            approach = -(d - gap(prev_frame, nb_prev)) * f_s
        ttg_z = None
        if st is not None and st.t_mu is not None and st.t_sigma and v_ego >= MIN_EGO_SPEED:
            ttg_z = (d / v_ego - st.t_mu) / st.t_sigma
        g = safe_gap(d, st)
        if g:
            n_safe += g
        out.update(
            {
                f"{pos}_lon_gap": nb.x - frame.x,
                f"{pos}_lat_gap": nb.y - frame.y,
                f"{pos}_dist": d,
                f"{pos}_dv": dv,
                f"{pos}_da": nb.x_acceleration - frame.x_acceleration,
                f"{pos}_dvy": nb.lat_velocity - frame.lat_velocity,
                f"{pos}_approach_rate": approach,
                f"{pos}_z": z_score(d, st),
                f"{pos}_s": scale_ratio(d, st),
                f"{pos}_safe_gap": g,
                f"{pos}_ttg_z": ttg_z,
                f"{pos}_cgt": critical_gap_time(d, dv, eps),
            }
        )
    out["safe_gap_count"] = n_safe
    for side, prefix in (("Left", "left"), ("Right", "right")):
        lead = _advantage(dist.get(f"{side}Lead"), dist.get("Lead"))
        rear = _advantage(dist.get(f"{side}Rear"), dist.get("Rear"))
        out[f"{prefix}_adv_lead"] = lead
        out[f"{prefix}_adv_rear"] = rear
        out[f"{prefix}_adv_score"] = None if lead is None or rear is None else min(lead, rear)
    out["occupancy"] = len(dist) / len(NEIGHBOR_POSITIONS)
    return out
