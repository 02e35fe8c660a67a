import numpy as np
import pytest

from lcintent.data.types import NEIGHBOR_POSITIONS, Recording, Track
from lcintent.labeling import Direction, LaneChangeEvent
from lcintent.synth import SynthConfig, synthesize_corpus, synthesize_recording


def make_track(n=30, track_id=1, vehicle_class="car", first_frame=0, **cols):
    """Straight, centred, constant-speed track; keyword columns override."""
    base = dict(
        x=np.arange(n, dtype=float),
        y=np.full(n, 5.625),
        x_velocity=np.full(n, 25.0),
        y_velocity=np.zeros(n),
        x_acceleration=np.zeros(n),
        y_acceleration=np.zeros(n),
        lat_velocity=np.zeros(n),
        lane_id=np.full(n, 2, dtype=np.int64),
        lateral_lane_offset=np.zeros(n),
        dist_left_boundary=np.full(n, 1.875),
        dist_right_boundary=np.full(n, 1.875),
        dhw=np.full(n, np.nan),
        thw=np.full(n, np.nan),
        ttc=np.full(n, np.nan),
    )
    neighbors = cols.pop("neighbors", {})
    ramp = cols.pop("ramp", None)
    base.update({k: np.asarray(v) for k, v in cols.items()})
    return Track(
        track_id=track_id,
        vehicle_class=vehicle_class,
        frame=np.arange(first_frame, first_frame + n, dtype=np.int64),
        neighbors=dict(neighbors),
        ramp=ramp,
        **base,
    )


def make_recording(tracks, recording_id=1, location_id=0, sampling_rate=25.0, kind="straight", speed_limit=33.3):
    return Recording(recording_id, location_id, sampling_rate, kind, speed_limit, tuple(tracks))


def gap_recording(gaps, recording_id=1, location_id=0):
    """One ego/lead pair per gap; every ego changes lanes at frame 5."""
    tracks, events = [], []
    for i, g in enumerate(gaps):
        ego_id, lead_id = 2 * i + 1, 2 * i + 2
        lead = np.full(10, lead_id)
        tracks.append(make_track(n=10, track_id=ego_id, y=np.full(10, 10.0 * i), neighbors={"Lead": lead}))
        tracks.append(make_track(n=10, track_id=lead_id, x=np.arange(10) + g, y=np.full(10, 10.0 * i)))
        events.append(LaneChangeEvent(ego_id, 5, 8, Direction.LEFT, 2, 3))
    return make_recording(tracks, recording_id, location_id), events


@pytest.fixture(scope="session")
def small_pair():
    return synthesize_recording(SynthConfig(tracks_per_location=40, seed=3), 0, 0)


@pytest.fixture(scope="session")
def tiny_corpus_pairs():
    """Five locations at 10 Hz; enough for quick pipeline runs."""
    return synthesize_corpus(SynthConfig(n_locations=5, tracks_per_location=30, sampling_rate=10.0, seed=11))


__all__ = ["make_track", "make_recording", "NEIGHBOR_POSITIONS"]
