"""Seeded traffic simulator producing recordings with known lane changes.

Vehicles enter a multi-lane road at regular intervals and follow the
Intelligent Driver Model longitudinally. Lateral motion is scripted: lane
keepers wander around their lane centre with a bounded low-frequency noise,
lane changers follow a short precursor drift and then a half-cosine transfer
into the adjacent lane. Because the lateral profile is fixed before the
simulation runs, the start and end frame of each manoeuvre are known exactly.

The number of lane changers is chosen so that a reference labeling of the
output (``ref_history_s``, ``ref_horizon_s``, ``ref_stride_s``) reproduces the
requested No-LC:Left:Right window ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data.types import NEIGHBOR_POSITIONS, NO_VEHICLE, Recording, Track
from .errors import InfeasibleConfig, ValidationError
from .labeling import Direction, LaneChangeEvent, steps, window_anchors

CROSSING = 0.2  # start threshold the scripted profile is built around (m)
PRECURSOR_OFFSET = 0.1  # lateral offset reached by the end of the precursor drift (m)
SETTLE_S = 1.0

IDM = {
    "car": dict(a=1.2, b=2.0, s0=2.0, headway=1.3, length=4.5),
    "truck": dict(a=0.6, b=1.5, s0=3.0, headway=1.8, length=12.0),
}


@dataclass(frozen=True)
class SynthConfig:
    n_locations: int = 1
    tracks_per_location: int = 60
    recordings_per_location: int = 1
    lane_count: int = 3
    lane_width: float = 3.75
    maneuver_rate: Optional[float] = None
    class_skew: tuple = (27.0, 1.0, 1.0)
    ramp_fraction: float = 0.0
    noise_std: float = 0.03
    seed: int = 0
    sampling_rate: float = 25.0
    track_duration_s: float = 10.0
    spawn_interval_s: float = 1.0
    speed_limit: Optional[float] = 33.3
    truck_fraction: float = 0.1
    precursor_s: float = 1.2
    maneuver_duration_s: tuple = (4.0, 5.0)
    ref_history_s: float = 1.0
    ref_horizon_s: float = 1.0
    ref_stride_s: float = 1.0

    def __post_init__(self):
        positive = ("n_locations", "tracks_per_location", "recordings_per_location", "lane_width",
                    "sampling_rate", "track_duration_s", "spawn_interval_s", "ref_history_s",
                    "ref_horizon_s", "ref_stride_s")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.lane_count < 2:
            raise ValidationError("lane_count must be at least 2")
        if len(self.class_skew) != 3 or min(self.class_skew) <= 0:
            raise ValidationError("class_skew needs three positive entries")
        if self.maneuver_rate is not None and not 0 <= self.maneuver_rate <= 1:
            raise ValidationError("maneuver_rate must lie in [0, 1]")
        if not 0 <= self.ramp_fraction <= 1:
            raise ValidationError("ramp_fraction must lie in [0, 1]")
        if self.noise_std < 0 or self.precursor_s < 0 or not 0 <= self.truck_fraction <= 1:
            raise ValidationError("noise_std, precursor_s and truck_fraction must be nonnegative")
        lo, hi = self.maneuver_duration_s
        if not 0 < lo <= hi:
            raise ValidationError("maneuver_duration_s must be an increasing positive pair")
        # the bounded noise must never reach the crossing threshold on its own
        if 3 * self.noise_std * np.sqrt(2 / 3) >= CROSSING:
            raise ValidationError("noise_std too large: lane keeping would trigger lane-change starts")

    @property
    def n_track_frames(self) -> int:
        return steps(self.track_duration_s, self.sampling_rate)


@dataclass
class _Plan:
    direction: Optional[Direction]
    t0: float  # onset of the main transfer (s, track-relative)
    duration: float
    noise_freq: np.ndarray
    noise_phase: np.ndarray
    vehicle_class: str
    v_desired: float
    start: int = -1  # track-relative frame offsets, filled by _lateral_profile
    end: int = -1


def _cos_time(level: float, amplitude: float, duration: float) -> float:
    """Time into the half-cosine transfer at which it has covered ``level``."""
    return duration / np.pi * np.arccos(1.0 - 2.0 * level / amplitude)


def _onset_window(cfg: SynthConfig, duration: float) -> tuple:
    w = cfg.lane_width
    c = PRECURSOR_OFFSET if cfg.precursor_s > 0 else 0.0
    t_cross = _cos_time(w / 2 - c, w - c, duration)
    lo = cfg.precursor_s + 1.5
    hi = cfg.track_duration_s - t_cross - SETTLE_S - 0.3
    return lo, hi


def _lateral_profile(cfg: SynthConfig, plan: _Plan, n: int):
    """Scripted lateral offset from the start lane centre, its rate and acceleration."""
    dt = 1.0 / cfg.sampling_rate
    t = np.arange(n) * dt
    w = cfg.lane_width
    a = cfg.noise_std * np.sqrt(2.0 / 3.0)
    arg = 2 * np.pi * plan.noise_freq[:, None] * t[None, :] + plan.noise_phase[:, None]
    noise = a * np.sin(arg).sum(axis=0)
    dnoise = a * (2 * np.pi * plan.noise_freq[:, None] * np.cos(arg)).sum(axis=0)
    ddnoise = -a * ((2 * np.pi * plan.noise_freq[:, None]) ** 2 * np.sin(arg)).sum(axis=0)
    if plan.direction is None:
        return noise, dnoise, ddnoise

    sign = 1.0 if plan.direction == Direction.LEFT else -1.0
    P = cfg.precursor_s
    c = PRECURSOR_OFFSET if P > 0 else 0.0
    tp = plan.t0 - P
    D = plan.duration
    y = np.zeros(n)
    v = np.zeros(n)
    acc = np.zeros(n)
    if P > 0:
        u = np.clip((t - tp) / P, 0.0, 1.0)
        y += c * u
        v += np.where((t > tp) & (t < plan.t0), c / P, 0.0)
    u = np.clip((t - plan.t0) / D, 0.0, 1.0)
    inside = (t > plan.t0) & (t < plan.t0 + D)
    y += (w - c) * 0.5 * (1 - np.cos(np.pi * u))
    v += np.where(inside, (w - c) * np.pi / (2 * D) * np.sin(np.pi * u), 0.0)
    acc += np.where(inside, (w - c) * np.pi**2 / (2 * D**2) * np.cos(np.pi * u), 0.0)

    start = int(np.flatnonzero(y >= CROSSING)[0])
    end = int(np.flatnonzero(y >= w / 2)[0])
    if sign < 0:
        # moving right the centre leaves the lane only once strictly past the boundary
        end = int(np.flatnonzero(y > w / 2)[0])
    t_quiet_end = t[end] + SETTLE_S
    env = np.ones(n)
    env = np.where(t >= tp - 1.0, np.clip(tp - t, 0.0, 1.0), env)
    env = np.where(t >= t_quiet_end, np.clip(t - t_quiet_end, 0.0, 1.0), env)
    denv = np.where((t > tp - 1.0) & (t < tp), -1.0, 0.0) + np.where(
        (t > t_quiet_end) & (t < t_quiet_end + 1.0), 1.0, 0.0
    )
    plan.start, plan.end = start, end
    lat = sign * y + env * noise
    lat_v = sign * v + env * dnoise + denv * noise
    lat_a = sign * acc + env * ddnoise + 2 * denv * dnoise
    return lat, lat_v, lat_a


def _reference_counts(cfg: SynthConfig, plan: _Plan, n: int) -> tuple:
    """(No-LC windows, LC windows) this track yields under the reference labeling."""
    f = cfg.sampling_rate
    w = steps(cfg.ref_history_s, f)
    h = steps(cfg.ref_horizon_s, f)
    stride = max(1, steps(cfg.ref_stride_s, f))
    nolc = lc = 0
    for a in window_anchors(n, w, h, stride):
        if plan.direction is None:
            nolc += 1
            continue
        if plan.start <= a <= max(plan.end, plan.start + w - 1):
            continue
        if a < plan.start <= a + h:
            lc += 1
        else:
            nolc += 1
    return nolc, lc


def _choose_maneuvers(cfg: SynthConfig, plans: list, order: np.ndarray, n: int) -> int:
    if cfg.maneuver_rate is not None:
        return int(round(cfg.maneuver_rate * len(plans)))
    n_skew, l_skew, r_skew = cfg.class_skew
    target = (l_skew + r_skew) / n_skew
    base_nolc = len(window_anchors(n, steps(cfg.ref_history_s, cfg.sampling_rate),
                                   steps(cfg.ref_horizon_s, cfg.sampling_rate),
                                   max(1, steps(cfg.ref_stride_s, cfg.sampling_rate))))
    nolc = base_nolc * len(plans)
    lc = 0
    best_m, best_err = 0, abs(0 - target)
    for m, i in enumerate(order, start=1):
        p = plans[i]
        p.direction = Direction.LEFT  # any direction: counts only depend on timing
        _lateral_profile(cfg, p, n)
        dn, dl = _reference_counts(cfg, p, n)
        p.direction = None
        nolc += dn - base_nolc
        lc += dl
        ratio = lc / max(nolc, 1)
        err = abs(ratio - target)
        if err < best_err:
            best_m, best_err = m, err
        if ratio > target:
            break
    return best_m


def _lane_ids(cfg: SynthConfig, kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "straight":
        return np.arange(1, cfg.lane_count + 1)
    # ramp sections: ids carry no left/right order
    ids = rng.choice(np.arange(1, 4 * cfg.lane_count + 1), size=cfg.lane_count, replace=False)
    return ids.astype(np.int64)


def synthesize_recording(cfg: SynthConfig, location_id: int = 0, recording_index: int = 0):
    """One recording plus its ground-truth lane-change events."""
    rng = np.random.default_rng([cfg.seed, location_id, recording_index])
    kind = "ramp" if rng.random() < cfg.ramp_fraction else "straight"
    lane_ids = _lane_ids(cfg, kind, rng)
    f = cfg.sampling_rate
    dt = 1.0 / f
    n = cfg.n_track_frames
    n_veh = int(np.ceil(cfg.tracks_per_location / cfg.recordings_per_location))
    L = cfg.lane_count
    w = cfg.lane_width

    # every random draw happens up front, in a fixed order
    is_truck = rng.random(n_veh) < cfg.truck_fraction
    v_noise = rng.normal(0.0, 1.5, n_veh)
    durations = rng.uniform(*cfg.maneuver_duration_s, n_veh)
    onset_u = rng.random(n_veh)
    noise_freq = rng.uniform(0.05, 0.3, (n_veh, 3))
    noise_phase = rng.uniform(0, 2 * np.pi, (n_veh, 3))
    lane_u = rng.random(n_veh)
    spawn_jitter = rng.uniform(0.0, 0.3 * cfg.spawn_interval_s, n_veh)
    order = rng.permutation(n_veh)
    x_entry = rng.uniform(60.0, 120.0)
    x_exit = x_entry + rng.uniform(150.0, 250.0)

    plans = []
    for i in range(n_veh):
        lo, hi = _onset_window(cfg, durations[i])
        cls = "truck" if is_truck[i] else "car"
        plans.append(
            _Plan(
                direction=None,
                t0=lo + onset_u[i] * max(hi - lo, 0.0),
                duration=float(durations[i]),
                noise_freq=noise_freq[i],
                noise_phase=noise_phase[i],
                vehicle_class=cls,
                v_desired=(22.0 if is_truck[i] else 25.0) + v_noise[i],
            )
        )
    n_man = _choose_maneuvers(cfg, plans, order, n)
    if n_man > 0:
        lo, hi = _onset_window(cfg, cfg.maneuver_duration_s[1])
        if hi < lo:
            raise InfeasibleConfig("manoeuvre does not fit into the track duration")
    n_left_share = cfg.class_skew[1] / (cfg.class_skew[1] + cfg.class_skew[2])
    for j, i in enumerate(order[:n_man]):
        is_left = int(np.floor((j + 1) * n_left_share)) > int(np.floor(j * n_left_share))
        plans[i].direction = Direction.LEFT if is_left else Direction.RIGHT

    spawn = np.round((np.arange(n_veh) * cfg.spawn_interval_s + spawn_jitter) * f).astype(np.int64)
    lat = np.zeros((n_veh, n))
    lat_v = np.zeros((n_veh, n))
    lat_a = np.zeros((n_veh, n))
    lane0 = np.zeros(n_veh, dtype=np.int64)
    lane_idx = np.zeros((n_veh, n), dtype=np.int64)

    X = np.zeros((n_veh, n))
    V = np.zeros((n_veh, n))
    A = np.zeros((n_veh, n))
    nbr = {pos: np.full((n_veh, n), NO_VEHICLE, dtype=np.int64) for pos in NEIGHBOR_POSITIONS}
    dhw = np.full((n_veh, n), np.nan)
    thw = np.full((n_veh, n), np.nan)
    ttc = np.full((n_veh, n), np.nan)

    lengths = np.array([IDM[p.vehicle_class]["length"] for p in plans])
    x_state = np.zeros(n_veh)
    v_state = np.zeros(n_veh)
    last_frame = int(spawn[-1]) + n
    lo_act = 0
    hi_act = 0
    for k in range(last_frame):
        while hi_act < n_veh and spawn[hi_act] <= k:
            i = hi_act
            _spawn_vehicle(cfg, plans[i], i, lane_u[i], lo_act, x_state, v_state, lane_idx, k - spawn, lane0)
            lat[i], lat_v[i], lat_a[i] = _lateral_profile(cfg, plans[i], n)
            centre = (lane0[i] + 0.5) * w
            lane_idx[i] = np.floor((centre + lat[i]) / w).astype(np.int64)
            hi_act += 1
        while lo_act < hi_act and k - spawn[lo_act] >= n:
            lo_act += 1
        idx = np.arange(lo_act, hi_act)
        if len(idx) == 0:
            continue
        r = k - spawn[idx]
        xs = x_state[idx]
        vs = v_state[idx]
        lanes = lane_idx[idx, r]
        dx = xs[None, :] - xs[:, None]  # j relative to i
        dl = lanes[None, :] - lanes[:, None]
        half = 0.5 * (lengths[idx][None, :] + lengths[idx][:, None])
        np.fill_diagonal(dl, 99)
        masks = {
            "Lead": (dl == 0) & (dx > 0),
            "Rear": (dl == 0) & (dx < 0),
            "LeftLead": (dl == 1) & (dx >= half),
            "LeftAlong": (dl == 1) & (np.abs(dx) < half),
            "LeftRear": (dl == 1) & (dx <= -half),
            "RightLead": (dl == -1) & (dx >= half),
            "RightAlong": (dl == -1) & (np.abs(dx) < half),
            "RightRear": (dl == -1) & (dx <= -half),
        }
        lead_j = None
        for pos, m in masks.items():
            dist = np.where(m, np.abs(dx), np.inf)
            j = dist.argmin(axis=1)
            ok = np.isfinite(dist[np.arange(len(idx)), j])
            nbr[pos][idx[ok], r[ok]] = idx[j[ok]] + 1
            if pos == "Lead":
                lead_j = np.where(ok, j, -1)

        # IDM step
        acc = np.empty(len(idx))
        for q, i in enumerate(idx):
            p = IDM[plans[i].vehicle_class]
            free = 1.0 - (vs[q] / max(plans[i].v_desired, 1.0)) ** 4
            inter = 0.0
            jl = lead_j[q]
            if jl >= 0:
                gap = max(dx[q, jl] - half[q, jl], 0.1)
                dv = vs[q] - vs[jl]
                s_star = p["s0"] + max(0.0, vs[q] * p["headway"] + vs[q] * dv / (2 * np.sqrt(p["a"] * p["b"])))
                inter = (s_star / gap) ** 2
                dhw[i, r[q]] = gap
                if vs[q] > 0.1:
                    thw[i, r[q]] = gap / vs[q]
                if dv > 0:
                    ttc[i, r[q]] = gap / dv
            acc[q] = float(np.clip(p["a"] * (free - inter), -8.0, p["a"]))
        X[idx, r] = xs
        V[idx, r] = vs
        A[idx, r] = acc
        v_new = np.maximum(vs + acc * dt, 0.0)
        x_state[idx] = xs + 0.5 * (vs + v_new) * dt
        v_state[idx] = v_new

    tracks = []
    events = []
    for i in range(n_veh):
        frames = spawn[i] + np.arange(n, dtype=np.int64)
        centre = (lane0[i] + 0.5) * w
        y_abs = centre + lat[i]
        li = lane_idx[i]
        lane_centre = (li + 0.5) * w
        ramp = None
        if kind == "ramp":
            d_exit = x_exit - X[i]
            with np.errstate(divide="ignore", invalid="ignore"):
                eta = np.where((d_exit > 0) & (V[i] > 0.1), d_exit / np.maximum(V[i], 0.1), np.nan)
            ramp = {"dist_to_entry": x_entry - X[i], "dist_to_exit": d_exit, "eta_exit": eta}
        tracks.append(
            Track(
                track_id=i + 1,
                vehicle_class=plans[i].vehicle_class,
                frame=frames,
                x=X[i].copy(),
                y=y_abs,
                x_velocity=V[i].copy(),
                y_velocity=lat_v[i].copy(),
                x_acceleration=A[i].copy(),
                y_acceleration=lat_a[i].copy(),
                lat_velocity=lat_v[i].copy(),
                lane_id=lane_ids[li],
                lateral_lane_offset=y_abs - lane_centre,
                dist_left_boundary=(li + 1) * w - y_abs,
                dist_right_boundary=y_abs - li * w,
                dhw=dhw[i].copy(),
                thw=thw[i].copy(),
                ttc=ttc[i].copy(),
                neighbors={pos: nbr[pos][i].copy() for pos in NEIGHBOR_POSITIONS},
                ramp=ramp,
            )
        )
        p = plans[i]
        if p.direction is not None:
            events.append(
                LaneChangeEvent(
                    track_id=i + 1,
                    start_frame=int(frames[p.start]),
                    end_frame=int(frames[p.end]),
                    direction=p.direction,
                    lane_before=int(lane_ids[li[p.start]]),
                    lane_after=int(lane_ids[li[p.end]]),
                )
            )
    rec = Recording(
        recording_id=location_id * cfg.recordings_per_location + recording_index + 1,
        location_id=location_id,
        sampling_rate=f,
        dataset_kind=kind,
        speed_limit=cfg.speed_limit,
        tracks=tuple(tracks),
    )
    return rec, events


def _spawn_vehicle(cfg, plan, i, lane_u, lo_act, x_state, v_state, lane_idx, rel_frame, lane0):
    L = cfg.lane_count
    if plan.direction == Direction.LEFT:
        allowed = np.arange(0, L - 1)
    elif plan.direction == Direction.RIGHT:
        allowed = np.arange(1, L)
    else:
        allowed = np.arange(L)
    if plan.vehicle_class == "truck":
        allowed = allowed[allowed <= max(1, allowed.min())]
    # prefer the lane with the most room behind the last entrant
    room = np.full(len(allowed), np.inf)
    v_ahead = np.full(len(allowed), np.inf)
    for q, lane in enumerate(allowed):
        for j in range(lo_act, i):
            r = rel_frame[j]
            if 0 <= r < lane_idx.shape[1] and lane_idx[j, r] == lane and x_state[j] < room[q]:
                room[q] = x_state[j]
                v_ahead[q] = v_state[j]
    best = np.flatnonzero(room == room.max())
    q = best[int(lane_u * len(best)) % len(best)]
    lane0[i] = allowed[q]
    plan.v_desired += 1.5 * lane0[i]
    v0 = plan.v_desired
    if np.isfinite(v_ahead[q]):
        v0 = min(v0, v_ahead[q])
    x_state[i] = 0.0
    v_state[i] = v0


def synthesize_corpus(cfg: SynthConfig) -> list:
    """All recordings of the configured locations, as ``(Recording, events)`` pairs."""
    out = []
    for loc in range(cfg.n_locations):
        for r in range(cfg.recordings_per_location):
            out.append(synthesize_recording(cfg, loc, r))
    return out


TINY_CONFIG = SynthConfig(n_locations=5, tracks_per_location=30, sampling_rate=10.0, seed=0)


def tiny_corpus(kind: str = "straight") -> list:
    """Small fixed corpus used when a command is given no data directory."""
    cfg = replace(TINY_CONFIG, ramp_fraction=1.0 if kind == "ramp" else 0.0)
    return [rec for rec, _ in synthesize_corpus(cfg)]
