"""Command-line interface.

Every subcommand accepts ``--config FILE``: a flat text file of
``key = value`` lines (``#`` starts a comment) whose keys are long flag
names, with or without the leading dashes. Flags given on the command line
override the file.

Exit status: 0 on success, 1 on usage or validation errors, 2 on runtime
failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bilstm.encoder import FORMAT as ENCODER_FORMAT, FORMAT_VERSION as ENCODER_VERSION
from .data.io import load_corpus, write_corpus
from .errors import IoFailure, LCIntentError, TrackTooShort, ValidationError
from .features.interaction import NeighborStats, fit_neighbor_stats
from .features.schema import FeatureVector, write_feature_csv
from .gbdt.boosting import FORMAT as GBDT_FORMAT, FORMAT_VERSION as GBDT_VERSION
from .labeling import LabelingParams, consistency_filter, detect_recording, label_windows, read_events, steps, write_events
from .metrics import compute_metrics
from .pipeline.cv import cross_validate
from .pipeline.dataset import build_window_set
from .pipeline.model import FORMAT as MODEL_FORMAT, FORMAT_VERSION as MODEL_VERSION, MODEL_KINDS, HybridModel, ModelSettings, derive_seed, fit_models
from .pipeline.split import SplitSpec, default_split, location_split
from .pipeline.sweep import ExperimentConfig, results_text, sweep, write_results
from .reporting import emit_distribution_stats
from .synth import SynthConfig, synthesize_corpus, tiny_corpus


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into a dict of strings."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed for every random choice")
    p.add_argument("--config", help="flat key = value file; flags override it")


def _data_opts(p, required=True):
    p.add_argument("--data", required=required, help="directory of *_tracks.csv recordings")
    p.add_argument("--kind", choices=("straight", "ramp"), default="straight")
    p.add_argument("--events", help="event table to use instead of running detection")


def _window_opts(p):
    p.add_argument("--history", type=float, default=1.0, help="history window W in seconds")
    p.add_argument("--horizon", type=float, default=1.0, help="prediction horizon T in seconds")
    p.add_argument("--stride", type=float, default=1.0, help="anchor stride in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lcintent", description="Lane-change intention prediction toolkit.")
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"lcintent {__version__} ({MODEL_FORMAT} v{MODEL_VERSION}, "
            f"{GBDT_FORMAT} v{GBDT_VERSION}, {ENCODER_FORMAT} v{ENCODER_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus and its ground-truth events")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--locations", type=int, default=5)
    p.add_argument("--tracks", type=int, default=60, help="tracks per location")
    p.add_argument("--recordings", type=int, default=1, help="recordings per location")
    p.add_argument("--rate", type=float, default=25.0, help="sampling rate in Hz")
    p.add_argument("--duration", type=float, default=10.0, help="track duration in seconds")
    p.add_argument("--ramp-fraction", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.03, help="lateral noise std in metres")
    p.add_argument("--skew", type=_floats, default=(27.0, 1.0, 1.0), help="NoLC,Left,Right window ratio")

    p = sub.add_parser("label", help="detect lane changes and label windows")
    _common(p)
    _data_opts(p)
    _window_opts(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("featurize", help="write the feature matrix of every labeled window")
    _common(p)
    _data_opts(p)
    _window_opts(p)
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--stats", help="neighbour statistics to use instead of fitting them")
    p.add_argument("--train-locations", type=_ints, help="locations the statistics are fitted on")

    p = sub.add_parser("train", help="fit one model on the training locations")
    _common(p)
    _data_opts(p)
    _window_opts(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--model", choices=MODEL_KINDS, default="hybrid")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--train-locations", type=_ints)
    p.add_argument("--no-resampling", action="store_true")

    p = sub.add_parser("evaluate", help="metrics of a saved model on held-out locations")
    _common(p)
    _data_opts(p)
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--stats", help="neighbour statistics (default: next to the model)")
    p.add_argument("--locations", type=_ints, help="locations to evaluate on (default: test side)")
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--out", help="write the report as JSON here instead of stdout")

    p = sub.add_parser("sweep", help="cross-validated grid over W and T for every model")
    _common(p)
    _data_opts(p, required=False)
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--windows", type=_floats, default=(1.0,))
    p.add_argument("--horizons", type=_floats, default=(1.0, 2.0, 3.0))
    p.add_argument("--models", type=_names, default=MODEL_KINDS)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--search-budget", type=int, default=1)
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--test-locations", type=_ints)
    p.add_argument("--no-resampling", action="store_true")

    p = sub.add_parser("stats", help="gap distribution tables around lane-change starts")
    _common(p)
    _data_opts(p)
    p.add_argument("--out", required=True)
    p.add_argument("--locations", type=_ints, help="restrict to these locations")
    return parser


_FLAGS = ("no_resampling",)


def _apply_config(parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage().strip())
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        if key in ("config", "help") or key not in actions:
            raise ValidationError(f"unknown config key {key!r} for {args.command}")
        if key in _FLAGS:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
        actions[key].required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _corpus(args) -> list:
    recs = load_corpus(args.data)
    recs = [r for r in recs if r.dataset_kind == args.kind]
    if not recs:
        raise ValidationError(f"no {args.kind} recordings in {args.data}")
    return recs


def _events(args, recs) -> dict:
    if args.events:
        return read_events(args.events)
    return {r.recording_id: detect_recording(r) for r in recs}


def _split(args, recs, train_locations=None) -> SplitSpec:
    locs = sorted({r.location_id for r in recs})
    if train_locations:
        train = frozenset(train_locations)
        return SplitSpec(train, frozenset(locs) - train)
    return default_split(locs, args.kind)


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_locations=args.locations,
        tracks_per_location=args.tracks,
        recordings_per_location=args.recordings,
        sampling_rate=args.rate,
        track_duration_s=args.duration,
        ramp_fraction=args.ramp_fraction,
        noise_std=args.noise,
        class_skew=args.skew,
        seed=args.seed,
    )
    pairs = synthesize_corpus(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus([rec for rec, _ in pairs], out)
    write_events({rec.recording_id: ev for rec, ev in pairs}, out / "truth_events.csv")
    print(f"wrote {len(pairs)} recordings to {out}")
    return 0


def cmd_label(args) -> int:
    recs = _corpus(args)
    events = _events(args, recs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_events(events, out / "events.csv")
    n = 0
    with open(out / "windows.csv", "w", encoding="utf-8") as fh:
        fh.write("recording_id,track_id,anchor_frame,history_s,horizon_s,label\n")
        for rec in recs:
            f_s = rec.sampling_rate
            stride = max(1, steps(args.stride, f_s))
            for track in rec.tracks:
                tev = [e for e in events.get(rec.recording_id, []) if e.track_id == track.track_id]
                try:
                    wins = label_windows(track, tev, args.history, args.horizon, f_s, stride, rec.recording_id)
                except TrackTooShort:
                    continue
                for w in consistency_filter(track, tev, wins, args.horizon, f_s):
                    fh.write(f"{rec.recording_id},{track.track_id},{w.anchor_frame},{args.history!r},{args.horizon!r},{int(w.label)}\n")
                    n += 1
    print(f"{sum(len(v) for v in events.values())} events, {n} windows")
    return 0


def cmd_featurize(args) -> int:
    recs = _corpus(args)
    events = _events(args, recs)
    if args.stats:
        stats = NeighborStats.load(args.stats)
    else:
        split = _split(args, recs, args.train_locations)
        stats = fit_neighbor_stats(recs, events, split.train_locations)
        stats.save(Path(args.out).with_suffix(".stats.txt"))
    ws = build_window_set(recs, events, args.history, args.horizon, stats, args.stride)
    vectors = [FeatureVector(ws.kind, np.nan_to_num(row, nan=0.0), np.isnan(row)) for row in ws.features]
    keys = np.column_stack([ws.keys, ws.labels])
    write_feature_csv(args.out, vectors, ws.kind, keys, ("location_id", "recording_id", "track_id", "anchor_frame", "label"))
    print(f"{len(ws)} windows x {ws.features.shape[1]} features")
    return 0


def _stats_path(model_path) -> Path:
    return Path(model_path).with_suffix(".stats.txt")


def cmd_train(args) -> int:
    recs = _corpus(args)
    events = _events(args, recs)
    split = _split(args, recs, args.train_locations)
    train_recs, _ = location_split(recs, split)
    stats = fit_neighbor_stats(train_recs, events, split.train_locations)
    ws = build_window_set(train_recs, events, args.history, args.horizon, stats, args.stride)
    settings = ModelSettings(resampling=not args.no_resampling and args.kind == "straight")
    cv = cross_validate(ws, (args.model,), settings, args.folds, derive_seed(args.seed, 0))
    model = fit_models(ws, (args.model,), settings, derive_seed(args.seed, 1))[args.model]
    model.thresholds = cv[args.model].thresholds
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    stats.save(_stats_path(args.out))
    print(f"cv macro-F1 {cv[args.model].mean_macro_f1:.4f}; model written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model = HybridModel.load(args.model)
    recs = _corpus(args)
    events = _events(args, recs)
    stats = NeighborStats.load(args.stats or _stats_path(args.model))
    if args.locations:
        locs = set(args.locations)
    else:
        locs = set(_split(args, recs).test_locations)
    recs = [r for r in recs if r.location_id in locs]
    if not recs:
        raise ValidationError("no recordings at the requested locations")
    ws = build_window_set(recs, events, model.history_s, model.horizon_s, stats, args.stride)
    if len(ws) == 0:
        raise ValidationError("no labeled windows to evaluate")
    report = compute_metrics(model.predict(ws), ws.labels)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    if args.data:
        recs = _corpus(args)
        events = _events(args, recs)
    else:
        recs, events = tiny_corpus(args.kind), None
    cfg = ExperimentConfig(
        dataset_kind=args.kind,
        windows=args.windows,
        horizons=args.horizons,
        models=args.models,
        resampling=False if args.no_resampling else None,
        cv_folds=args.folds,
        search_budget=args.search_budget,
        seed=args.seed,
        stride_s=args.stride,
        test_locations=args.test_locations,
    )
    result = sweep(recs, cfg, args.out, events)
    write_results(result.rows, args.out)
    sys.stdout.write(results_text(result.rows))
    return 0


def cmd_stats(args) -> int:
    recs = _corpus(args)
    events = _events(args, recs)
    tables = emit_distribution_stats(recs, events, locations=set(args.locations) if args.locations else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gap_bands.csv").write_text(tables.bands_csv(), encoding="utf-8")
    (out / "gap_histogram.csv").write_text(tables.histogram_csv(), encoding="utf-8")
    print(f"{len(tables.bands)} positions, {len(tables.histogram)} histogram cells")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "label": cmd_label,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            sys.stderr.write(parser.format_help())
            return 1
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (LCIntentError, OSError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"failure: {exc}\n")
        return 2
