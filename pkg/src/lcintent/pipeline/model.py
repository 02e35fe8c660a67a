"""Fitting and applying the hybrid model and its two single-branch baselines.

* ``gbdt_only`` sees the physics feature vector.
* ``bilstm_only`` classifies the raw sequence with the encoder's own head.
* ``hybrid`` feeds ``[embedding || physics features]`` to the boosted trees.

Resampling runs on training data only: on flattened standardized sequences
for the encoder, and on the standardized model matrix for the trees.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..bilstm import BiLSTMEncoder, TrainConfig, embed_batch, train_encoder
from ..errors import IoFailure, SchemaMismatch, ValidationError
from ..features.schema import schema_for
from ..gbdt import GBDTConfig, GBDTModel, predict_proba as gbdt_predict_proba, train as gbdt_train
from ..imbalance import (
    ResampleConfig,
    ThresholdSet,
    apply_thresholds,
    inverse_frequency_weights,
    resample,
)
from .dataset import WindowSet

MODEL_KINDS = ("gbdt_only", "bilstm_only", "hybrid")
FORMAT = "lcintent-model"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Column-wise z-scoring fitted on present values; NaN passes through."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        present = ~np.isnan(X)
        n = present.sum(axis=0)
        safe = np.where(present, X, 0.0)
        mean = np.divide(safe.sum(axis=0), n, out=np.zeros(X.shape[1]), where=n > 0)
        var = np.divide(
            (np.where(present, X - mean, 0.0) ** 2).sum(axis=0), n, out=np.zeros(X.shape[1]), where=n > 0
        )
        std = np.sqrt(var)
        return cls(mean, np.where(std > 1e-12, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float))


def fuse(e, f) -> np.ndarray:
    """Concatenate embeddings (first) and physics features; works row-wise on matrices."""
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    if e.ndim != f.ndim or (e.ndim == 2 and len(e) != len(f)):
        raise SchemaMismatch(f"cannot fuse shapes {e.shape} and {f.shape}")
    return np.concatenate([e, f], axis=-1)


@dataclass(frozen=True)
class ModelSettings:
    """Everything that shapes a fit apart from the data."""

    gbdt: GBDTConfig = GBDTConfig(max_bins=63, n_rounds=80, min_samples_leaf=10)
    lstm: TrainConfig = TrainConfig(hidden=16, epochs=12, batch_size=256, patience=3)
    resample: ResampleConfig = ResampleConfig()
    resampling: bool = True
    weight_basis: str = "pre"

    def __post_init__(self):
        if self.weight_basis not in ("pre", "post"):
            raise ValidationError("weight_basis must be 'pre' or 'post'")

    def to_dict(self) -> dict:
        return {
            "gbdt": asdict(self.gbdt),
            "lstm": asdict(self.lstm),
            "resample": asdict(self.resample),
            "resampling": self.resampling,
            "weight_basis": self.weight_basis,
        }


@dataclass(eq=False)
class HybridModel:
    """A fitted classifier of any of the three kinds plus what it needs at inference."""

    kind: str
    dataset_kind: str
    history_s: float
    horizon_s: float
    sampling_rate: float
    thresholds: ThresholdSet = field(default_factory=ThresholdSet)
    encoder: Optional[BiLSTMEncoder] = None
    gbdt: Optional[GBDTModel] = None
    scaler: Optional[Standardizer] = None
    class_weights: Optional[tuple] = None

    @property
    def schema(self) -> tuple:
        return schema_for(self.dataset_kind)

    @property
    def input_width(self) -> int:
        """Width of the tree input (or of one sequence step for ``bilstm_only``)."""
        if self.kind == "bilstm_only":
            return self.encoder.input_dim
        k = self.encoder.embedding_dim if self.kind == "hybrid" else 0
        return k + len(self.schema)

    def model_matrix(self, ws: WindowSet) -> np.ndarray:
        if self.kind == "gbdt_only":
            X = ws.features
        else:
            X = fuse(embed_batch(ws.sequences, self.encoder), ws.features)
        if X.shape[1] != self.input_width:
            raise SchemaMismatch(f"model expects width {self.input_width}, got {X.shape[1]}")
        return self.scaler.transform(X)

    def predict_proba(self, ws: WindowSet) -> np.ndarray:
        if len(ws) == 0:
            return np.empty((0, 3))
        if self.kind == "bilstm_only":
            return self.encoder.predict_proba(ws.sequences)
        return gbdt_predict_proba(self.gbdt, self.model_matrix(ws))

    def predict(self, ws: WindowSet) -> np.ndarray:
        return apply_thresholds(self.predict_proba(ws), self.thresholds)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "dataset_kind": self.dataset_kind,
            "history_s": self.history_s,
            "horizon_s": self.horizon_s,
            "sampling_rate": self.sampling_rate,
            "thresholds": {"tau_left": self.thresholds.tau_left, "tau_right": self.thresholds.tau_right},
            "class_weights": None if self.class_weights is None else list(self.class_weights),
            "encoder": None if self.encoder is None else self.encoder.to_dict(),
            "gbdt": None if self.gbdt is None else self.gbdt.to_dict(),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HybridModel":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{FORMAT_VERSION} artifact")
        return cls(
            kind=d["kind"],
            dataset_kind=d["dataset_kind"],
            history_s=d["history_s"],
            horizon_s=d["horizon_s"],
            sampling_rate=d["sampling_rate"],
            thresholds=ThresholdSet(**d["thresholds"]),
            class_weights=None if d["class_weights"] is None else tuple(d["class_weights"]),
            encoder=None if d["encoder"] is None else BiLSTMEncoder.from_dict(d["encoder"]),
            gbdt=None if d["gbdt"] is None else GBDTModel.from_dict(d["gbdt"]),
            scaler=None if d["scaler"] is None else Standardizer.from_dict(d["scaler"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "HybridModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json(), encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "HybridModel":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def _weights_for(y_before: np.ndarray, y_after: np.ndarray, basis: str):
    counts = np.bincount(y_before if basis == "pre" else y_after, minlength=3)
    return inverse_frequency_weights(np.maximum(counts, 1))


def _fit_encoder(ws: WindowSet, settings: ModelSettings, seed: int) -> tuple:
    """Encoder trained on (optionally resampled) sequences; returns it and its class weights."""
    X = ws.sequences
    y = ws.labels
    y_fit = y
    if settings.resampling:
        flat = X.reshape(len(X), -1)
        sc = Standardizer.fit(flat)
        Z, y_fit = resample(sc.transform(flat), y, replace(settings.resample, seed=seed))
        X = sc.inverse(Z).reshape(-1, *ws.sequences.shape[1:])
    cw = _weights_for(y, y_fit, settings.weight_basis)
    enc = train_encoder(X, y_fit, replace(settings.lstm, seed=seed), sample_weights=cw.sample_weights(y_fit))
    return enc, cw


def _fit_trees(X: np.ndarray, y: np.ndarray, settings: ModelSettings, seed: int) -> tuple:
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    y_fit = y
    if settings.resampling:
        Z, y_fit = resample(Z, y, replace(settings.resample, seed=seed))
    cw = _weights_for(y, y_fit, settings.weight_basis)
    model = gbdt_train(Z, y_fit, cw.sample_weights(y_fit), replace(settings.gbdt, seed=seed), class_weights=cw.weights)
    return model, scaler, cw


def derive_seed(*parts: int) -> int:
    """Stable child seed from a master seed and job coordinates."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def fit_models(ws: WindowSet, kinds, settings: ModelSettings = ModelSettings(), seed: int = 0) -> dict:
    """Fit every requested kind on ``ws``; the encoder is trained once and shared."""
    kinds = tuple(kinds)
    for k in kinds:
        if k not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {k!r}")
    meta = dict(
        dataset_kind=ws.kind, history_s=ws.history_s, horizon_s=ws.horizon_s, sampling_rate=ws.sampling_rate
    )
    out = {}
    enc = enc_cw = None
    if "bilstm_only" in kinds or "hybrid" in kinds:
        enc, enc_cw = _fit_encoder(ws, settings, derive_seed(seed, 1))
    if "bilstm_only" in kinds:
        out["bilstm_only"] = HybridModel(kind="bilstm_only", encoder=enc, class_weights=enc_cw.weights, **meta)
    if "gbdt_only" in kinds:
        model, scaler, cw = _fit_trees(ws.features, ws.labels, settings, derive_seed(seed, 2))
        out["gbdt_only"] = HybridModel(kind="gbdt_only", gbdt=model, scaler=scaler, class_weights=cw.weights, **meta)
    if "hybrid" in kinds:
        fused = fuse(embed_batch(ws.sequences, enc), ws.features)
        model, scaler, cw = _fit_trees(fused, ws.labels, settings, derive_seed(seed, 3))
        out["hybrid"] = HybridModel(
            kind="hybrid", encoder=enc, gbdt=model, scaler=scaler, class_weights=cw.weights, **meta
        )
    return {k: out[k] for k in kinds}
