"""Class-imbalance handling: SMOTE + Tomek links, inverse-frequency weights and
per-class decision thresholds.

Matrices follow the model-input convention: NaN marks a missing feature.
Labels are 0 (no change), 1 (left), 2 (right).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInput, EmptyClass, TooFewSamples, ValidationError
from .metrics import N_CLASSES, per_class_f1

LEFT, RIGHT = 1, 2
THRESHOLD_GRID = np.round(np.arange(1, 26) * 0.02, 10)


@dataclass(frozen=True)
class ResampleConfig:
    target_ratio: tuple = (27.0, 1.0, 1.0)
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if len(self.target_ratio) != N_CLASSES or any(not r > 0 for r in self.target_ratio):
            raise ValidationError("target_ratio needs three positive entries")
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be at least 1")


@dataclass(frozen=True)
class ClassWeights:
    weights: tuple

    def __post_init__(self):
        if any(not (np.isfinite(w) and w > 0) for w in self.weights):
            raise ValidationError("class weights must be finite and positive")

    def sample_weights(self, y) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)[np.asarray(y, dtype=np.int64)]


@dataclass(frozen=True)
class ThresholdSet:
    tau_left: float = 0.5
    tau_right: float = 0.5

    def __post_init__(self):
        for t in (self.tau_left, self.tau_right):
            if not 0 < t < 1:
                raise ValidationError("thresholds must lie in (0, 1)")


@dataclass(frozen=True)
class ResampleReport:
    before: tuple
    after_smote: tuple
    after_tomek: tuple

    def to_text(self) -> str:
        rows = [("stage", "NoLC", "LeftLC", "RightLC")]
        for name, c in (("before", self.before), ("after_smote", self.after_smote), ("after_tomek", self.after_tomek)):
            rows.append((name,) + tuple(str(v) for v in c))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def _masked_sq_dists(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Squared distances from ``x`` to each row of ``Y`` over mutually present dims."""
    diff = Y - x
    both = ~np.isnan(diff)
    d2 = np.where(both, diff, 0.0)
    d2 = np.einsum("ij,ij->i", d2, d2)
    d2[~both.any(axis=1)] = np.inf
    return d2


def smote(
    samples: np.ndarray,
    n_new: int,
    k: int = 5,
    seed=0,
    u_range: tuple = (0.0, 1.0),
) -> np.ndarray:
    """Synthesise ``n_new`` points of one class by neighbour interpolation.

    Each synthetic point is ``x + u (x_nn - x)`` for a random base ``x``, one
    of its ``k`` nearest neighbours ``x_nn`` and ``u`` drawn uniformly from
    ``u_range``. Distances and interpolation use only dimensions present in
    both points; the synthetic point keeps the base point's missing pattern.
    """
    X = np.asarray(samples, dtype=float)
    if n_new < 0:
        raise ValidationError("n_new must be nonnegative")
    if n_new == 0:
        return np.empty((0, X.shape[1]))
    n = len(X)
    if n < 2:
        raise TooFewSamples(f"SMOTE needs at least 2 samples, got {n}")
    if not 1 <= k <= n - 1:
        raise TooFewSamples(f"k={k} needs at least {k + 1} samples, got {n}")
    rng = np.random.default_rng(seed)

    neighbours = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d2 = _masked_sq_dists(X[i], X)
        d2[i] = np.inf
        # stable sort breaks distance ties toward the lower index
        neighbours[i] = np.argsort(d2, kind="stable")[:k]

    base = rng.integers(0, n, size=n_new)
    pick = neighbours[base, rng.integers(0, k, size=n_new)]
    u = rng.uniform(u_range[0], u_range[1], size=n_new)[:, None]
    xb, xn = X[base], X[pick]
    step = np.where(np.isnan(xn), 0.0, xn - xb)
    return xb + u * step


def _impute_columns(X: np.ndarray) -> np.ndarray:
    if not np.isnan(X).any():
        return X
    means = np.nanmean(np.where(np.isnan(X).all(axis=0), 0.0, X), axis=0)
    return np.where(np.isnan(X), means, X)


def nearest_neighbors(X: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Index of every row's Euclidean nearest other row, ties to the lower index.

    Distances come from a blocked Gram-matrix expansion; rows whose best
    candidates are within round-off of each other are re-resolved exactly.
    """
    n = len(X)
    sq = np.einsum("ij,ij->i", X, X)
    nn = np.empty(n, dtype=np.int64)
    for s in range(0, n, chunk):
        block = X[s : s + chunk]
        d2 = sq[s : s + chunk, None] + sq[None, :] - 2.0 * block @ X.T
        rows = np.arange(len(block))
        d2[rows, rows + s] = np.inf
        best = d2.min(axis=1)
        slack = 1e-9 * (sq[s : s + chunk] + sq.max()) + 1e-12
        near = d2 <= (best + slack)[:, None]
        single = near.sum(axis=1) == 1
        nn[s : s + chunk] = np.argmax(near, axis=1)
        for r in np.flatnonzero(~single):
            cand = np.flatnonzero(near[r])
            diff = X[cand] - block[r]
            exact = np.einsum("ij,ij->i", diff, diff)
            nn[s + r] = cand[np.flatnonzero(exact == exact.min())[0]]
    return nn


def tomek_links(X: np.ndarray, y) -> list:
    """Cross-class pairs ``(i, j)``, ``i < j``, that are mutual nearest neighbours.

    Missing entries are replaced by column means for the distance computation.
    """
    X = _impute_columns(np.asarray(X, dtype=float))
    y = np.asarray(y)
    if len(X) < 2:
        raise TooFewSamples("Tomek links need at least 2 samples")
    nn = nearest_neighbors(X)
    i = np.arange(len(X))
    mutual = (nn[nn] == i) & (y != y[nn]) & (i < nn)
    return [(int(a), int(nn[a])) for a in np.flatnonzero(mutual)]


def target_counts(counts, ratio) -> np.ndarray:
    """Class sizes after oversampling minorities up to ``ratio`` relative to class 0."""
    counts = np.asarray(counts, dtype=np.int64)
    ratio = np.asarray(ratio, dtype=float)
    goal = np.rint(counts[0] * ratio / ratio[0]).astype(np.int64)
    goal[0] = counts[0]
    return np.maximum(goal, counts)


def resample(X, y, cfg: ResampleConfig = ResampleConfig(), return_report: bool = False):
    """SMOTE each minority class up to ``cfg.target_ratio``, then drop both
    endpoints of every Tomek link."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=N_CLASSES)
    if np.any(counts == 0):
        raise EmptyClass(f"class counts {counts.tolist()}")
    goal = target_counts(counts, cfg.target_ratio)
    rng = np.random.default_rng(cfg.seed)
    parts_X, parts_y = [X], [y]
    for c in range(1, N_CLASSES):
        extra = int(goal[c] - counts[c])
        if extra <= 0:
            continue
        members = X[y == c]
        if len(members) < 2:
            raise TooFewSamples(f"class {c} has {len(members)} sample(s), SMOTE needs 2")
        k = min(cfg.k_neighbors, len(members) - 1)
        parts_X.append(smote(members, extra, k, seed=rng.integers(2**32)))
        parts_y.append(np.full(extra, c, dtype=np.int64))
    Xs = np.vstack(parts_X)
    ys = np.concatenate(parts_y)
    after_smote = np.bincount(ys, minlength=N_CLASSES)
    links = tomek_links(Xs, ys)
    drop = np.zeros(len(ys), dtype=bool)
    for a, b in links:
        drop[a] = drop[b] = True
    Xt, yt = Xs[~drop], ys[~drop]
    if return_report:
        report = ResampleReport(
            before=tuple(int(v) for v in counts),
            after_smote=tuple(int(v) for v in after_smote),
            after_tomek=tuple(int(v) for v in np.bincount(yt, minlength=N_CLASSES)),
        )
        return Xt, yt, report
    return Xt, yt


def inverse_frequency_weights(counts) -> ClassWeights:
    """``w_c = 1 / f_c`` with ``f_c`` the relative class frequency.

    Computed as one division ``N / n_c`` so each weight is the double nearest
    to the exact ratio.
    """
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise EmptyClass(f"class counts {counts.tolist()}")
    total = counts.sum()
    return ClassWeights(tuple(float(total / v) for v in counts))


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != N_CLASSES:
        raise ValidationError("probabilities must be an N x 3 matrix")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValidationError("probability rows must sum to 1")
    return probs


def _decide(probs: np.ndarray, tau_left, tau_right) -> np.ndarray:
    """Vectorised decision rule; ``tau_*`` broadcast against the row axis."""
    pl = probs[:, LEFT]
    pr = probs[:, RIGHT]
    tau_left = np.asarray(tau_left, dtype=float)[..., None]
    tau_right = np.asarray(tau_right, dtype=float)[..., None]
    fired = (pl >= tau_left) | (pr >= tau_right)
    minority = np.where(pl / tau_left >= pr / tau_right, LEFT, RIGHT)
    return np.where(fired, minority, np.argmax(probs, axis=1))


def apply_thresholds(probs, taus: ThresholdSet):
    """Predicted class for one probability row or for every row of a matrix.

    A minority class fires when its probability reaches its threshold; if
    either fires, the one with the larger ``p / tau`` wins (left on ties),
    otherwise the argmax is returned.
    """
    p = np.asarray(probs, dtype=float)
    single = p.ndim == 1
    p = _check_probs(p[None, :] if single else p)
    pred = _decide(p, taus.tau_left, taus.tau_right)
    return int(pred[0]) if single else pred.astype(np.int64)


def _macro_f1_batch(preds: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Macro-F1 of every row of ``preds`` (shape G x N) against ``y``."""
    codes = y[None, :] * N_CLASSES + preds
    offs = np.arange(len(preds))[:, None] * N_CLASSES * N_CLASSES
    cm = np.bincount((codes + offs).ravel(), minlength=len(preds) * 9).reshape(len(preds), 3, 3)
    return per_class_f1(cm).mean(axis=1)


def calibrate_thresholds(probs, labels, grid: Optional[np.ndarray] = None) -> ThresholdSet:
    """Exhaustive search of ``(tau_left, tau_right)`` maximising macro-F1.

    Among equally good pairs the one with the smallest ``tau_left + tau_right``
    wins, then the smallest ``tau_left``.
    """
    probs = _check_probs(probs)
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(probs):
        raise ValidationError("labels and probabilities differ in length")
    if len(np.unique(y)) < 2:
        raise DegenerateInput("threshold calibration needs at least two classes")
    grid = THRESHOLD_GRID if grid is None else np.asarray(grid, dtype=float)
    tl, tr = np.meshgrid(grid, grid, indexing="ij")
    tl, tr = tl.ravel(), tr.ravel()
    scores = np.empty(len(tl))
    chunk = max(1, 2_000_000 // max(len(y), 1))
    for s in range(0, len(tl), chunk):
        preds = _decide(probs, tl[s : s + chunk], tr[s : s + chunk])
        scores[s : s + chunk] = _macro_f1_batch(preds, y)
    best = scores.max()
    cand = np.flatnonzero(scores == best)
    order = np.lexsort((tl[cand], tl[cand] + tr[cand]))
    i = cand[order[0]]
    return ThresholdSet(float(tl[i]), float(tr[i]))
