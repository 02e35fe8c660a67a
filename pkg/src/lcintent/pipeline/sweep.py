"""Experiment runner: label, split, featurize, cross-validate and evaluate over
a grid of history windows W and horizons T."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import IoFailure, ValidationError
from ..features.interaction import DEFAULT_EPS, fit_neighbor_stats
from ..labeling import LabelingParams, detect_recording
from ..metrics import compute_metrics
from .cv import GBDT_SPACE, apply_gbdt_params, cross_validate, hyperparameter_search
from .dataset import FeatureCache, build_window_set
from .model import MODEL_KINDS, ModelSettings, derive_seed, fit_models
from .split import SplitSpec, default_split, location_split


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_kind: str = "straight"
    windows: tuple = (1.0,)
    horizons: tuple = (1.0, 2.0, 3.0)
    models: tuple = MODEL_KINDS
    resampling: Optional[bool] = None
    cv_folds: int = 5
    search_budget: int = 1
    seed: int = 0
    stride_s: float = 1.0
    test_locations: Optional[tuple] = None
    dataset_name: Optional[str] = None
    eps: float = DEFAULT_EPS
    settings: ModelSettings = ModelSettings()
    labeling: LabelingParams = LabelingParams()

    def __post_init__(self):
        if not self.windows or not self.horizons or not self.models:
            raise ValidationError("windows, horizons and models must be nonempty")
        if any(not w > 0 for w in self.windows) or any(not t > 0 for t in self.horizons):
            raise ValidationError("windows and horizons must be positive")
        if self.cv_folds < 2:
            raise ValidationError("cv_folds must be at least 2")
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ValidationError(f"unknown model {m!r}")

    @property
    def use_resampling(self) -> bool:
        # ramp data skips resampling unless asked for explicitly
        return self.dataset_kind == "straight" if self.resampling is None else self.resampling

    @property
    def name(self) -> str:
        return self.dataset_name or self.dataset_kind


RESULT_COLUMNS = (
    "dataset",
    "model",
    "history_s",
    "horizon_s",
    "n_train",
    "n_test",
    "cv_macro_f1",
    "train_accuracy",
    "train_macro_f1",
    "test_accuracy",
    "test_macro_f1",
    "test_f1_nolc",
    "test_f1_left",
    "test_f1_right",
    "tau_left",
    "tau_right",
    "best_w",
)


@dataclass
class SweepResult:
    rows: list
    models: dict = field(default_factory=dict)
    split: Optional[SplitSpec] = None
    stats: object = None

    def row(self, model: str, history_s: float, horizon_s: float) -> dict:
        for r in self.rows:
            if r["model"] == model and r["history_s"] == history_s and r["horizon_s"] == horizon_s:
                return r
        raise KeyError((model, history_s, horizon_s))

    def best(self, model: str, horizon_s: float) -> dict:
        return next(r for r in self.rows if r["model"] == model and r["horizon_s"] == horizon_s and r["best_w"])


def flag_best_windows(rows: list) -> None:
    """Mark, per (model, T), the row with the highest test macro-F1 (smaller W on ties)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["model"], r["horizon_s"]), []).append(r)
    for members in groups.values():
        top = max(members, key=lambda r: (r["test_macro_f1"], -r["history_s"]))
        for r in members:
            r["best_w"] = r is top


def model_filename(model: str, history_s: float, horizon_s: float) -> str:
    return f"model_{model}_W{history_s:g}_T{horizon_s:g}.json"


def sweep(recordings, cfg: ExperimentConfig = ExperimentConfig(), out_dir=None, events_by_recording=None) -> SweepResult:
    """Run every (W, T) cell and return one result row per (model, W, T).

    When ``out_dir`` is given the neighbour statistics and every fitted
    model are written there as well.
    """
    recordings = [r for r in recordings if r.dataset_kind == cfg.dataset_kind]
    if not recordings:
        raise ValidationError(f"no {cfg.dataset_kind} recordings in the corpus")
    if events_by_recording is None:
        events_by_recording = {r.recording_id: detect_recording(r, cfg.labeling) for r in recordings}
    locations = sorted({r.location_id for r in recordings})
    if cfg.test_locations is None:
        split = default_split(locations, cfg.dataset_kind)
    else:
        test = frozenset(cfg.test_locations)
        split = SplitSpec(frozenset(locations) - test, test)
    train_recs, test_recs = location_split(recordings, split)
    stats = fit_neighbor_stats(train_recs, events_by_recording, split.train_locations)
    settings = replace(cfg.settings, resampling=cfg.use_resampling)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        stats.save(out / "neighbor_stats.txt")

    cache_train, cache_test = FeatureCache(), FeatureCache()
    rows, fitted = [], {}
    for wi, W in enumerate(cfg.windows):
        for ti, T in enumerate(cfg.horizons):
            cell = wi * len(cfg.horizons) + ti
            cell_seed = derive_seed(cfg.seed, cell)
            tr = build_window_set(train_recs, events_by_recording, W, T, stats, cfg.stride_s, cache_train, cfg.eps)
            te = build_window_set(test_recs, events_by_recording, W, T, stats, cfg.stride_s, cache_test, cfg.eps)
            cell_settings = settings
            if cfg.search_budget > 1:
                target = "hybrid" if "hybrid" in cfg.models else cfg.models[0]

                def score(params, tr=tr, target=target):
                    s = apply_gbdt_params(settings, params)
                    return cross_validate(tr, (target,), s, cfg.cv_folds, cell_seed)[target].mean_macro_f1

                best, _, _ = hyperparameter_search(GBDT_SPACE, cfg.search_budget, score, derive_seed(cfg.seed, cell, 7))
                cell_settings = apply_gbdt_params(settings, best)
            cv = cross_validate(tr, cfg.models, cell_settings, cfg.cv_folds, cell_seed)
            models = fit_models(tr, cfg.models, cell_settings, derive_seed(cell_seed, 999))
            for name, m in models.items():
                m.thresholds = cv[name].thresholds
                train_rep = compute_metrics(m.predict(tr), tr.labels)
                test_rep = compute_metrics(m.predict(te), te.labels) if len(te) else None
                rows.append(
                    {
                        "dataset": cfg.name,
                        "model": name,
                        "history_s": float(W),
                        "horizon_s": float(T),
                        "n_train": len(tr),
                        "n_test": len(te),
                        "cv_macro_f1": cv[name].mean_macro_f1,
                        "train_accuracy": train_rep.accuracy,
                        "train_macro_f1": train_rep.macro_f1,
                        "test_accuracy": test_rep.accuracy if test_rep else 0.0,
                        "test_macro_f1": test_rep.macro_f1 if test_rep else 0.0,
                        "test_f1_nolc": float(test_rep.f1[0]) if test_rep else 0.0,
                        "test_f1_left": float(test_rep.f1[1]) if test_rep else 0.0,
                        "test_f1_right": float(test_rep.f1[2]) if test_rep else 0.0,
                        "tau_left": m.thresholds.tau_left,
                        "tau_right": m.thresholds.tau_right,
                        "best_w": False,
                    }
                )
                fitted[(name, float(W), float(T))] = m
                if out is not None:
                    m.save(out / model_filename(name, W, T))
    flag_best_windows(rows)
    return SweepResult(rows, fitted, split, stats)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


TABLE_HEADER = (
    "Dataset",
    "Model",
    "W (s)",
    "Prediction Horizon",
    "Overall Accuracy",
    "Macro F1",
    "NO-LC F1",
    "Left-LC F1",
    "Right-LC F1",
    "Best W",
)


def results_text(rows: list) -> str:
    """Aligned table in the layout of a per-horizon results table."""
    body = [
        (
            r["dataset"],
            r["model"],
            f"{r['history_s']:g}",
            f"{r['horizon_s']:g} s",
            f"{r['test_accuracy']:.4f}",
            f"{r['test_macro_f1']:.4f}",
            f"{r['test_f1_nolc']:.4f}",
            f"{r['test_f1_left']:.4f}",
            f"{r['test_f1_right']:.4f}",
            "*" if r["best_w"] else "",
        )
        for r in rows
    ]
    table = [TABLE_HEADER] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(TABLE_HEADER))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_results(rows: list, out_dir) -> tuple:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(results_csv(rows), encoding="utf-8")
        (out / "results.txt").write_text(results_text(rows), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return out / "results.csv", out / "results.txt"
