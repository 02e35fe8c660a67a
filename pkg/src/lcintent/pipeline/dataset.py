"""Labeled windows turned into aligned sequence and feature arrays."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrackTooShort, ValidationError
from ..features.interaction import DEFAULT_EPS, NeighborStats
from ..features.schema import featurize_window, schema_for
from ..labeling import consistency_filter, label_windows, steps


@dataclass(eq=False)
class WindowSet:
    """All windows of one (history, horizon) pair.

    ``keys`` rows are (location_id, recording_id, track_id, anchor_frame).
    ``features`` holds NaN where a feature is missing.
    """

    kind: str
    history_s: float
    horizon_s: float
    sampling_rate: float
    keys: np.ndarray
    labels: np.ndarray
    sequences: np.ndarray
    features: np.ndarray

    def __len__(self):
        return len(self.labels)

    @property
    def feature_names(self) -> tuple:
        return schema_for(self.kind)

    @property
    def groups(self) -> np.ndarray:
        """One id per (recording, track) so a track never straddles folds."""
        _, inv = np.unique(self.keys[:, 1:3], axis=0, return_inverse=True)
        return inv.ravel()

    def subset(self, mask) -> "WindowSet":
        return WindowSet(
            self.kind,
            self.history_s,
            self.horizon_s,
            self.sampling_rate,
            self.keys[mask],
            self.labels[mask],
            self.sequences[mask],
            self.features[mask],
        )

    def at_locations(self, locations) -> "WindowSet":
        return self.subset(np.isin(self.keys[:, 0], sorted(locations)))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=3)


class FeatureCache:
    """Feature rows keyed by (recording, track, anchor frame, history steps).

    Features read only the history window, so every horizon reuses them.
    """

    def __init__(self):
        self._rows: dict = {}

    def __len__(self):
        return len(self._rows)

    def get(self, key, compute):
        row = self._rows.get(key)
        if row is None:
            row = compute()
            self._rows[key] = row
        return row


def build_window_set(
    recordings,
    events_by_recording: dict,
    history_s: float,
    horizon_s: float,
    stats: NeighborStats,
    stride_s: float = 1.0,
    cache: FeatureCache | None = None,
    eps: float = DEFAULT_EPS,
) -> WindowSet:
    """Label, filter and featurize every window of every track."""
    recordings = list(recordings)
    if not recordings:
        raise ValidationError("no recordings")
    kinds = {r.dataset_kind for r in recordings}
    rates = {r.sampling_rate for r in recordings}
    if len(kinds) != 1 or len(rates) != 1:
        raise ValidationError("recordings must share dataset kind and sampling rate")
    kind, f_s = kinds.pop(), rates.pop()
    cache = FeatureCache() if cache is None else cache
    w = steps(history_s, f_s)
    stride = max(1, steps(stride_s, f_s))
    keys, labels, seqs, feats = [], [], [], []
    for rec in recordings:
        events = events_by_recording.get(rec.recording_id, [])
        by_track: dict = {}
        for e in events:
            by_track.setdefault(e.track_id, []).append(e)
        for track in rec.tracks:
            tev = by_track.get(track.track_id, [])
            try:
                wins = label_windows(track, tev, history_s, horizon_s, f_s, stride, rec.recording_id)
            except TrackTooShort:
                continue
            for win in consistency_filter(track, tev, wins, horizon_s, f_s):
                row = track.index_of(win.anchor_frame)
                key = (rec.recording_id, track.track_id, win.anchor_frame, w)

                def compute(rec=rec, track=track, row=row, tev=tev):
                    return featurize_window(rec, track, row, w, stats, tev, eps).as_array()

                keys.append((rec.location_id, rec.recording_id, track.track_id, win.anchor_frame))
                labels.append(int(win.label))
                seqs.append(win.sequence)
                feats.append(cache.get(key, compute))
    n_feat = len(schema_for(kind))
    return WindowSet(
        kind=kind,
        history_s=history_s,
        horizon_s=horizon_s,
        sampling_rate=f_s,
        keys=np.array(keys, dtype=np.int64).reshape(-1, 4),
        labels=np.array(labels, dtype=np.int64),
        sequences=np.array(seqs, dtype=float).reshape(-1, w, 8),
        features=np.array(feats, dtype=float).reshape(-1, n_feat),
    )
