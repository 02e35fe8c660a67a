"""Multiclass gradient boosting with a softmax cross-entropy objective.

Every round fits one tree per class to the per-class gradients and Hessians
of the weighted cross-entropy. Gradient-based one-side sampling (GOSS) can
restrict each round to the largest-gradient rows plus an amplified random
sample of the rest.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidFractions, IoFailure, SchemaMismatch, ShapeMismatch, SingleClass, ValidationError
from .binning import BinMapper, fit_bins
from .tree import Tree, grow_tree

FORMAT = "lcintent-gbdt"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GBDTConfig:
    max_bins: int = 255
    max_leaves: int = 31
    max_depth: int = 8
    min_samples_leaf: int = 20
    lam: float = 1.0
    gamma: float = 0.0
    learning_rate: float = 0.1
    n_rounds: int = 100
    goss: bool = True
    goss_a: float = 0.2
    goss_b: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.max_leaves < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValidationError("max_leaves, max_depth and min_samples_leaf must be positive")
        if self.lam < 0 or self.gamma < 0:
            raise ValidationError("lam and gamma must be nonnegative")
        if not self.learning_rate > 0 or self.n_rounds < 0:
            raise ValidationError("learning_rate must be positive and n_rounds nonnegative")
        if self.goss:
            _check_fractions(self.goss_a, self.goss_b)


def _check_fractions(a: float, b: float) -> None:
    if not (0 < a <= 1 and 0 <= b and a + b <= 1 + 1e-12):
        raise InvalidFractions(f"need 0 < a, 0 <= b, a + b <= 1 (got a={a}, b={b})")


def goss_select(g_norms, a: float, b: float, seed=0):
    """Rows kept by one-side sampling and their amplification factors.

    The ``ceil(a N)`` rows with the largest gradient norm are kept with
    weight 1; ``ceil(b N)`` of the others are drawn uniformly without
    replacement and weighted ``(1 - a) / b``. Indices come back sorted.
    """
    _check_fractions(a, b)
    g_norms = np.asarray(g_norms, dtype=float)
    n = len(g_norms)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_top = min(n, math.ceil(a * n - 1e-9))
    order = np.argsort(-g_norms, kind="stable")
    top, rest = order[:n_top], order[n_top:]
    n_rand = min(len(rest), math.ceil(b * n - 1e-9)) if b > 0 else 0
    sampled = rng.choice(rest, size=n_rand, replace=False) if n_rand else np.empty(0, dtype=np.int64)
    idx = np.concatenate([top, sampled]).astype(np.int64)
    amp = np.concatenate([np.ones(len(top)), np.full(len(sampled), (1.0 - a) / b if b > 0 else 1.0)])
    order = np.argsort(idx)
    return idx[order], amp[order]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_objective(logits, labels, weights=None):
    """Weighted cross-entropy ``-(1/n) sum_i w_i log p_{i, y_i}`` with per-class
    gradients ``w_i (p - y)`` and diagonal Hessians ``w_i p (1 - p)``."""
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    n, c = z.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_norm[:, None]
    p = np.exp(log_p)
    onehot = np.zeros_like(p)
    onehot[np.arange(n), y] = 1.0
    loss = float(-(w * log_p[np.arange(n), y]).sum() / n)
    g = w[:, None] * (p - onehot)
    h = w[:, None] * p * (1.0 - p)
    return loss, g, h


@dataclass(eq=False)
class GBDTModel:
    mapper: BinMapper
    config: GBDTConfig
    n_classes: int
    base_scores: np.ndarray
    trees: list = field(default_factory=list)
    class_weights: Optional[tuple] = None
    thresholds: Optional[dict] = None
    feature_names: Optional[tuple] = None
    train_loss: list = field(default_factory=list)

    def predict_logits(self, X) -> np.ndarray:
        Xb = self.mapper.transform(X)
        z = np.tile(self.base_scores, (len(Xb), 1))
        lr = self.config.learning_rate
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                z[:, c] += lr * tree.predict_binned(Xb, self.mapper.missing_bin)
        return z

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "n_classes": self.n_classes,
            "base_scores": [float(v) for v in self.base_scores],
            "class_weights": None if self.class_weights is None else [float(v) for v in self.class_weights],
            "thresholds": self.thresholds,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
            "bin_mapper": self.mapper.to_dict(),
            "trees": [[t.to_dict() for t in rt] for rt in self.trees],
            "train_loss": [float(v) for v in self.train_loss],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBDTModel":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{FORMAT_VERSION} artifact")
        return cls(
            mapper=BinMapper.from_dict(d["bin_mapper"]),
            config=GBDTConfig(**d["config"]),
            n_classes=int(d["n_classes"]),
            base_scores=np.asarray(d["base_scores"], dtype=float),
            trees=[[Tree.from_dict(t) for t in rt] for rt in d["trees"]],
            class_weights=None if d["class_weights"] is None else tuple(d["class_weights"]),
            thresholds=d["thresholds"],
            feature_names=None if d["feature_names"] is None else tuple(d["feature_names"]),
            train_loss=list(d["train_loss"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "GBDTModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json(), encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "GBDTModel":
        try:
            return cls.from_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def class_priors(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(float)
    return np.maximum(counts / counts.sum(), 1e-12)


def train(
    X,
    y,
    weights=None,
    config: GBDTConfig = GBDTConfig(),
    n_classes: int = 3,
    class_weights: Optional[tuple] = None,
    feature_names=None,
    mapper: Optional[BinMapper] = None,
) -> GBDTModel:
    """Fit ``config.n_rounds`` rounds of ``n_classes`` trees.

    ``weights`` are per-row sample weights (for instance inverse class
    frequencies); ``class_weights`` is only recorded in the artifact.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeMismatch(f"X {X.shape} vs y {y.shape}")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(y):
        raise ShapeMismatch("weights and labels differ in length")
    mapper = mapper or fit_bins(X, config.max_bins)
    Xb = mapper.transform(X)
    n_bins = mapper.n_bins
    base = np.log(class_priors(y, n_classes))
    model = GBDTModel(
        mapper=mapper,
        config=config,
        n_classes=n_classes,
        base_scores=base,
        class_weights=class_weights,
        feature_names=None if feature_names is None else tuple(feature_names),
    )
    rng = np.random.default_rng(config.seed)
    logits = np.tile(base, (len(y), 1))
    for _ in range(config.n_rounds):
        loss, g, h = softmax_objective(logits, y, w)
        model.train_loss.append(loss)
        if config.goss:
            idx, amp = goss_select(np.abs(g).sum(axis=1), config.goss_a, config.goss_b, rng)
            scale = np.zeros(len(y))
            scale[idx] = amp
            g = g * scale[:, None]
            h = h * scale[:, None]
        else:
            idx = None
        round_trees = []
        for c in range(n_classes):
            tree = grow_tree(
                Xb,
                g[:, c],
                h[:, c],
                n_bins,
                mapper.missing_bin,
                max_leaves=config.max_leaves,
                max_depth=config.max_depth,
                min_samples_leaf=config.min_samples_leaf,
                lam=config.lam,
                gamma=config.gamma,
                indices=idx,
            )
            logits[:, c] += config.learning_rate * tree.predict_binned(Xb, mapper.missing_bin)
            round_trees.append(tree)
        model.trees.append(round_trees)
    model.train_loss.append(softmax_objective(logits, y, w)[0])
    return model


def predict_proba(model: GBDTModel, X) -> np.ndarray:
    return softmax(model.predict_logits(X))
