"""Mini-batch training of the encoder as a weighted three-class classifier."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import NonFiniteLoss, ShapeMismatch, SingleClass, ValidationError
from .encoder import BiLSTMEncoder


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 32
    epochs: int = 30
    batch_size: int = 256
    learning_rate: float = 0.05
    momentum: float = 0.9
    clip_norm: float = 1.0
    pooling: str = "mean"
    seed: int = 0
    patience: int = 5
    class_weights: Optional[tuple] = None

    def __post_init__(self):
        if self.hidden < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("hidden and batch_size must be positive, epochs nonnegative")
        if not (self.learning_rate > 0 and self.clip_norm > 0 and 0 <= self.momentum < 1):
            raise ValidationError("learning_rate and clip_norm must be positive, momentum in [0, 1)")


def fit_standardization(X: np.ndarray) -> tuple:
    flat = X.reshape(-1, X.shape[2])
    mean = np.nanmean(flat, axis=0)
    std = np.nanstd(flat, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    std = np.where(~(std > 1e-12), 1.0, std)
    return mean, std


def train_encoder(sequences, labels, cfg: TrainConfig = TrainConfig(), sample_weights=None) -> BiLSTMEncoder:
    """Train from a seeded initialisation with momentum SGD and global-norm clipping.

    Per-sample weights come from ``sample_weights`` if given, else from
    ``cfg.class_weights`` indexed by label. Training stops early once the
    epoch loss has not improved for ``cfg.patience`` epochs.
    """
    X = np.asarray(sequences, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 3 or len(X) != len(y):
        raise ShapeMismatch(f"sequences {X.shape} vs labels {y.shape}")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")
    if sample_weights is not None:
        w = np.asarray(sample_weights, dtype=float)
    elif cfg.class_weights is not None:
        w = np.asarray(cfg.class_weights, dtype=float)[y]
    else:
        w = np.ones(len(y))

    enc = BiLSTMEncoder.init(X.shape[2], cfg.hidden, cfg.pooling, seed=cfg.seed)
    enc.mean, enc.std = fit_standardization(X)
    Z = enc.standardize(X)
    params = enc.parameters()
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed + 1)
    best = np.inf
    stale = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for s in range(0, len(y), cfg.batch_size):
            b = order[s : s + cfg.batch_size]
            loss, grads = enc.loss_and_grads(Z[b], y[b], w[b])
            if not np.isfinite(loss):
                raise NonFiniteLoss("training loss became non-finite")
            total += loss * len(b)
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            scale = min(1.0, cfg.clip_norm / norm) if norm > 0 else 1.0
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * scale * g
                p += v
        epoch_loss = total / len(y)
        if epoch_loss < best - 1e-4:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                break
    return enc
