"""Reading and writing recordings in a highD/exiD-like comma-separated layout.

A recording is two files sharing a prefix::

    <prefix>_tracks.csv          one row per (track, frame)
    <prefix>_recordingMeta.csv   one row: id, locationId, frameRate,
                                 datasetKind, speedLimit

Absent values (no neighbour, no headway, no speed limit) are empty fields.
Floats are written with Python's shortest round-trip repr, so a write/load
cycle reproduces every value exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import EmptyRecording, IoFailure, MissingColumn, NonMonotonicFrames, ValidationError
from .types import NEIGHBOR_POSITIONS, NO_VEHICLE, RAMP_FIELDS, Recording, Track

TRACK_COLUMNS = {
    "frame": "frame",
    "id": "track_id",
    "class": "vehicle_class",
    "x": "x",
    "y": "y",
    "xVelocity": "x_velocity",
    "yVelocity": "y_velocity",
    "xAcceleration": "x_acceleration",
    "yAcceleration": "y_acceleration",
    "latVelocity": "lat_velocity",
    "laneId": "lane_id",
    "latLaneCenterOffset": "lateral_lane_offset",
    "distLeftBoundary": "dist_left_boundary",
    "distRightBoundary": "dist_right_boundary",
    "dhw": "dhw",
    "thw": "thw",
    "ttc": "ttc",
}
NEIGHBOR_COLUMNS = {
    "precedingId": "Lead",
    "followingId": "Rear",
    "leftPrecedingId": "LeftLead",
    "leftAlongsideId": "LeftAlong",
    "leftFollowingId": "LeftRear",
    "rightPrecedingId": "RightLead",
    "rightAlongsideId": "RightAlong",
    "rightFollowingId": "RightRear",
}
RAMP_COLUMNS = {
    "distToEntry": "dist_to_entry",
    "distToExit": "dist_to_exit",
    "etaExit": "eta_exit",
}
META_COLUMNS = ("id", "locationId", "frameRate", "datasetKind", "speedLimit")

_FLOAT_COLS = [c for c, f in TRACK_COLUMNS.items() if f not in ("frame", "track_id", "vehicle_class", "lane_id")]


def meta_path_for(tracks_path) -> Path:
    p = Path(tracks_path)
    name = p.name
    if name.endswith("_tracks.csv"):
        return p.with_name(name[: -len("_tracks.csv")] + "_recordingMeta.csv")
    return p.with_name(p.stem + "_recordingMeta.csv")


def _read_meta(path: Path) -> dict:
    try:
        df = pd.read_csv(path, keep_default_na=True, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise IoFailure(f"metadata file not found: {path}") from exc
    for col in META_COLUMNS:
        if col not in df.columns:
            raise MissingColumn(col)
    if len(df) != 1:
        raise ValidationError(f"{path}: expected exactly one metadata row")
    row = df.iloc[0]
    limit = row["speedLimit"]
    return {
        "recording_id": int(row["id"]),
        "location_id": int(row["locationId"]),
        "sampling_rate": float(row["frameRate"]),
        "dataset_kind": str(row["datasetKind"]),
        "speed_limit": None if pd.isna(limit) else float(limit),
    }


def load_recording(path, dataset_kind: str | None = None) -> Recording:
    """Load ``<prefix>_tracks.csv`` plus its metadata file.

    ``dataset_kind`` overrides the kind stored in the metadata file when given.
    """
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"no such file: {path}")
    meta = _read_meta(meta_path_for(path))
    if dataset_kind is not None:
        meta["dataset_kind"] = dataset_kind

    df = pd.read_csv(path, float_precision="round_trip", dtype={"class": str})
    for col in list(TRACK_COLUMNS) + list(NEIGHBOR_COLUMNS):
        if col not in df.columns:
            raise MissingColumn(col)
    if df.empty:
        raise EmptyRecording(f"{path} has no data rows")
    has_ramp = all(c in df.columns for c in RAMP_COLUMNS)

    tracks = []
    # sort=False keeps first-appearance order, which write_recording preserves
    for track_id, g in df.groupby("id", sort=False):
        frames = g["frame"].to_numpy(dtype=np.int64)
        if np.any(np.diff(frames) != 1):
            raise NonMonotonicFrames(int(track_id))
        cols = {TRACK_COLUMNS[c]: g[c].to_numpy(dtype=float) for c in _FLOAT_COLS}
        neighbors = {
            pos: g[c].fillna(NO_VEHICLE).to_numpy(dtype=np.int64) for c, pos in NEIGHBOR_COLUMNS.items()
        }
        ramp = None
        if has_ramp:
            ramp = {f: g[c].to_numpy(dtype=float) for c, f in RAMP_COLUMNS.items()}
            if all(np.all(np.isnan(v)) for v in ramp.values()):
                ramp = None
        classes = g["class"].unique()
        if len(classes) != 1:
            raise ValidationError(f"track {track_id} changes vehicle class")
        tracks.append(
            Track(
                track_id=int(track_id),
                vehicle_class=str(classes[0]).strip().lower(),
                frame=frames,
                lane_id=g["laneId"].to_numpy(dtype=np.int64),
                neighbors=neighbors,
                ramp=ramp,
                **cols,
            )
        )
    return Recording(tracks=tuple(tracks), **meta)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    return repr(float(v))


def write_recording(rec: Recording, path) -> None:
    """Write ``rec`` to ``path`` (the tracks file) and its sibling metadata file."""
    path = Path(path)
    any_ramp = any(t.ramp is not None for t in rec.tracks)
    header = list(TRACK_COLUMNS) + list(NEIGHBOR_COLUMNS) + (list(RAMP_COLUMNS) if any_ramp else [])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t in rec.tracks:
                float_cols = [getattr(t, TRACK_COLUMNS[c]) for c in _FLOAT_COLS]
                nb_cols = [t.neighbors[pos] for pos in NEIGHBOR_COLUMNS.values()]
                ramp_cols = []
                if any_ramp:
                    ramp_cols = [
                        t.ramp[f] if t.ramp is not None else np.full(len(t), np.nan) for f in RAMP_COLUMNS.values()
                    ]
                for i in range(len(t)):
                    row = [str(int(t.frame[i])), str(t.track_id), t.vehicle_class]
                    row += [_fmt(c[i]) for c in float_cols[:7]]
                    row.append(str(int(t.lane_id[i])))
                    row += [_fmt(c[i]) for c in float_cols[7:]]
                    row += ["" if c[i] == NO_VEHICLE else str(int(c[i])) for c in nb_cols]
                    row += [_fmt(c[i]) for c in ramp_cols]
                    w.writerow(row)
        with open(meta_path_for(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(META_COLUMNS)
            w.writerow(
                [rec.recording_id, rec.location_id, _fmt(rec.sampling_rate), rec.dataset_kind, _fmt(rec.speed_limit)]
            )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def tracks_filename(recording_id: int) -> str:
    return f"{recording_id:02d}_tracks.csv"


def write_corpus(recordings, directory) -> list:
    directory = Path(directory)
    paths = []
    for rec in recordings:
        p = directory / tracks_filename(rec.recording_id)
        write_recording(rec, p)
        paths.append(p)
    return paths


def load_corpus(directory) -> list:
    """Every ``*_tracks.csv`` under ``directory``, ordered by file name."""
    paths = sorted(Path(directory).glob("*_tracks.csv"))
    if not paths:
        raise IoFailure(f"no *_tracks.csv files in {directory}")
    return [load_recording(p) for p in paths]
