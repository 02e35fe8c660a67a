import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcintent.errors import MissingLateralData, OutOfRange, SameLane, TrackTooShort, ValidationError
from lcintent.labeling import (
    Direction,
    Intent,
    LabelingParams,
    LaneChangeEvent,
    consistency_filter,
    detect_events,
    detect_recording,
    direction_ramp,
    direction_straight,
    label_windows,
    read_events,
    write_events,
)
from lcintent.synth import SynthConfig, synthesize_recording

from conftest import make_track

P = LabelingParams()


def _event(start, end=None, d=Direction.LEFT, track_id=1):
    return LaneChangeEvent(track_id, start, start + 60 if end is None else end, d, 2, 3)


def test_constant_offset_has_no_events():
    assert detect_events(make_track(n=200), P, "straight", 25.0) == []


def test_subthreshold_bump_has_no_events():
    n = 200
    t = np.arange(n) / 25.0
    off = 0.15 * np.exp(-((t - 4.0) ** 2))
    vel = np.gradient(off, 1 / 25.0)
    track = make_track(n=n, lateral_lane_offset=off, lat_velocity=vel)
    assert detect_events(track, P, "straight", 25.0) == []


def test_injected_left_change_recovered(small_pair):
    rec, truth = small_pair
    left = next(e for e in truth if e.direction == Direction.LEFT)
    found = detect_events(rec.track(left.track_id), P, "straight", rec.sampling_rate)
    assert len(found) == 1
    assert abs(found[0].start_frame - left.start_frame) <= 1
    assert abs(found[0].end_frame - left.end_frame) <= 1
    assert found[0].direction == Direction.LEFT


def test_missing_lateral_data():
    off = np.zeros(20)
    off[5] = np.nan
    with pytest.raises(MissingLateralData):
        detect_events(make_track(n=20, lateral_lane_offset=off), P)


@pytest.mark.parametrize("before,after,expected", [(2, 3, Direction.LEFT), (3, 2, Direction.RIGHT)])
def test_direction_straight(before, after, expected):
    assert direction_straight(before, after) == expected


def test_direction_straight_same_lane():
    with pytest.raises(SameLane):
        direction_straight(2, 2)


@pytest.mark.parametrize("v,expected", [(0.5, Direction.LEFT), (-0.5, Direction.RIGHT), (0.0, Direction.RIGHT)])
def test_direction_ramp(v, expected):
    track = make_track(n=20, lat_velocity=np.full(20, v))
    assert direction_ramp(track, 5, P, 25.0) == expected


def test_direction_ramp_out_of_range():
    with pytest.raises(OutOfRange):
        direction_ramp(make_track(n=20), 50, P, 25.0)


def test_params_must_be_positive():
    with pytest.raises(ValidationError):
        LabelingParams(crossing_threshold=0.0)


def test_no_events_all_nolc():
    wins = label_windows(make_track(n=100), [], 1.0, 1.0, 25.0)
    assert wins and all(w.label == Intent.NO_LC for w in wins)
    assert all(w.sequence.shape == (25, 8) for w in wins)


def test_event_half_horizon_ahead_is_labeled():
    # anchor a, event starts a + 0.5 T
    wins = label_windows(make_track(n=200), [_event(100 + 12)], 1.0, 1.0, 25.0)
    w = next(w for w in wins if w.anchor_frame == 100)
    assert w.label == Intent.LEFT_LC


def test_event_at_horizon_edge_is_labeled():
    wins = label_windows(make_track(n=200), [_event(125, d=Direction.RIGHT)], 1.0, 1.0, 25.0)
    by_anchor = {w.anchor_frame: w.label for w in wins}
    assert by_anchor[100] == Intent.RIGHT_LC
    assert by_anchor[99] == Intent.NO_LC


def test_windows_inside_event_or_after_start_dropped():
    ev = _event(100, 160)
    anchors = {w.anchor_frame for w in label_windows(make_track(n=300), [ev], 1.0, 1.0, 25.0)}
    assert not anchors & set(range(100, 161))
    assert 99 in anchors and 161 in anchors


def test_window_whose_history_holds_a_start_is_dropped():
    # a short event that ended before the anchor but started within the last W
    ev = _event(100, 105)
    anchors = {w.anchor_frame for w in label_windows(make_track(n=300), [ev], 1.0, 1.0, 25.0)}
    assert not anchors & set(range(100, 125))
    assert 125 in anchors


def test_sequence_ends_at_anchor():
    track = make_track(n=60, x=np.arange(60) * 2.0, x_velocity=np.arange(60, dtype=float))
    w = label_windows(track, [], 1.0, 1.0, 25.0)[3]
    assert w.sequence[-1, 0] == track.x_velocity[w.anchor_frame]
    assert np.all(np.diff(w.sequence[:, 0]) == 1.0)


def test_track_too_short():
    with pytest.raises(TrackTooShort):
        label_windows(make_track(n=40), [], 1.0, 1.0, 25.0)


def test_consistency_filter_two_close_events():
    track = make_track(n=300)
    events = [_event(100, 105), _event(110, 170, Direction.RIGHT)]
    wins = label_windows(track, events, 1.0, 1.0, 25.0)
    kept = consistency_filter(track, events, wins, 1.0, 25.0)
    for w in wins:
        both = 100 > w.anchor_frame and 110 <= w.anchor_frame + 25
        assert (w in kept) != both


@pytest.mark.parametrize("events", [[], [_event(100)]])
def test_consistency_filter_single_or_none(events):
    track = make_track(n=300)
    wins = label_windows(track, events, 1.0, 1.0, 25.0)
    assert consistency_filter(track, events, wins, 1.0, 25.0) == wins


def test_event_table_roundtrip(tmp_path, small_pair):
    rec, truth = small_pair
    write_events({rec.recording_id: truth}, tmp_path / "ev.csv")
    assert read_events(tmp_path / "ev.csv") == {rec.recording_id: truth}


@pytest.mark.parametrize("seed,kind", [(1, "straight"), (2, "straight"), (3, "ramp")])
def test_recovery_over_corpus(seed, kind):
    cfg = SynthConfig(tracks_per_location=60, ramp_fraction=1.0 if kind == "ramp" else 0.0, noise_std=0.05, seed=seed)
    rec, truth = synthesize_recording(cfg)
    found = detect_recording(rec, P)
    assert len(found) == len(truth)
    key = lambda e: (e.track_id, e.start_frame)
    for a, b in zip(sorted(found, key=key), sorted(truth, key=key)):
        assert a.track_id == b.track_id and a.direction == b.direction
        assert abs(a.start_frame - b.start_frame) <= 1 and abs(a.end_frame - b.end_frame) <= 1


def test_direction_rules_agree_on_straight_roads(small_pair):
    rec, _ = small_pair
    events = detect_recording(rec, P)
    assert events
    for e in events:
        assert direction_ramp(rec.track(e.track_id), e.start_frame, P, rec.sampling_rate) == e.direction


@settings(max_examples=40, deadline=None)
@given(start=st.integers(30, 250), t1=st.integers(1, 3), dt=st.integers(1, 3))
def test_label_horizon_monotone(start, t1, dt):
    track = make_track(n=400)
    ev = [_event(start, start + 80)]
    lc = lambda T: {w.anchor_frame for w in label_windows(track, ev, 1.0, T, 25.0) if w.label != Intent.NO_LC}
    small, large = lc(float(t1)), lc(float(t1 + dt))
    assert small <= large


@settings(max_examples=40, deadline=None)
@given(starts=st.lists(st.integers(30, 350), min_size=0, max_size=4, unique=True), stride=st.integers(1, 7))
def test_no_window_overlaps_an_event(starts, stride):
    events = [_event(s, s + 20) for s in sorted(starts)]
    track = make_track(n=420)
    for w in label_windows(track, events, 1.0, 2.0, 25.0, stride):
        for e in events:
            assert not e.start_frame <= w.anchor_frame <= e.end_frame
            assert not w.anchor_frame - 25 < e.start_frame <= w.anchor_frame
