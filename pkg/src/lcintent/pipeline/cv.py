"""Track-grouped stratified cross-validation, threshold calibration and random search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import EmptySpace, TooFewSamplesPerClass, ValidationError
from ..imbalance import ThresholdSet, apply_thresholds, calibrate_thresholds
from ..metrics import MetricsReport, compute_metrics
from .dataset import WindowSet
from .model import ModelSettings, derive_seed, fit_models


def group_folds(labels, groups, k: int, seed: int = 0) -> np.ndarray:
    """Fold index per row; whole groups move together and classes spread evenly.

    Each group is tagged with the rarest class it contains. Groups are then
    dealt round-robin into folds, rarest tag first, in a seeded order.
    """
    labels = np.asarray(labels, dtype=np.int64)
    groups = np.asarray(groups)
    if k < 2:
        raise ValidationError("at least two folds are needed")
    uniq, inv = np.unique(groups, return_inverse=True)
    inv = inv.ravel()
    if len(uniq) < k:
        raise TooFewSamplesPerClass(f"{len(uniq)} groups cannot fill {k} folds")
    counts = np.bincount(labels, minlength=3)
    rarity = np.argsort(counts, kind="stable")
    rank = np.empty(3, dtype=np.int64)
    rank[rarity] = np.arange(3)
    tag = np.full(len(uniq), 3, dtype=np.int64)
    for g, y in zip(inv, labels):
        tag[g] = min(tag[g], rank[y])
    for c in range(3):
        if counts[c] and np.unique(inv[labels == c]).size < k:
            raise TooFewSamplesPerClass(f"class {c} occurs in fewer than {k} tracks")
    rng = np.random.default_rng(seed)
    fold_of_group = np.empty(len(uniq), dtype=np.int64)
    nxt = 0
    for r in range(3):
        members = np.flatnonzero(tag == r)
        members = members[rng.permutation(len(members))]
        for g in members:
            fold_of_group[g] = nxt % k
            nxt += 1
    return fold_of_group[inv]


@dataclass
class CVResult:
    fold_metrics: list = field(default_factory=list)
    fold_thresholds: list = field(default_factory=list)

    @property
    def thresholds(self) -> ThresholdSet:
        """Per-class mean of the fold thresholds."""
        if not self.fold_thresholds:
            return ThresholdSet()
        return ThresholdSet(
            float(np.mean([t.tau_left for t in self.fold_thresholds])),
            float(np.mean([t.tau_right for t in self.fold_thresholds])),
        )

    @property
    def mean_macro_f1(self) -> float:
        return float(np.mean([m.macro_f1 for m in self.fold_metrics])) if self.fold_metrics else 0.0


def cross_validate(
    ws: WindowSet,
    kinds,
    settings: ModelSettings = ModelSettings(),
    folds: int = 5,
    seed: int = 0,
) -> dict:
    """Per model kind, fold metrics on held-out folds and fold-calibrated thresholds.

    Thresholds for a fold are calibrated on that fold's held-out predictions,
    so they never see data outside the training side of the outer split.
    """
    fold_of = group_folds(ws.labels, ws.groups, folds, seed)
    results = {k: CVResult() for k in kinds}
    for f in range(folds):
        train, held = ws.subset(fold_of != f), ws.subset(fold_of == f)
        models = fit_models(train, kinds, settings, derive_seed(seed, 100 + f))
        for k, m in models.items():
            probs = m.predict_proba(held)
            try:
                taus = calibrate_thresholds(probs, held.labels)
            except ValidationError:
                taus = ThresholdSet()
            results[k].fold_thresholds.append(taus)
            results[k].fold_metrics.append(compute_metrics(apply_thresholds(probs, taus), held.labels))
    return results


def sample_space(space: dict, budget: int, seed: int = 0) -> list:
    """Up to ``budget`` configurations drawn uniformly from the declared ranges.

    ``space`` maps a name to ``(low, high)`` (float), ``(low, high, "int")``
    or ``(low, high, "log")``; a list value is sampled as a choice. When every
    parameter is a choice list and the budget covers the whole grid, each
    grid point is visited once, in a seeded order.
    """
    if not space:
        raise EmptySpace("search space has no parameters")
    if budget < 1:
        raise ValidationError("search budget must be at least 1")
    rng = np.random.default_rng(seed)
    names = sorted(space)
    if any(isinstance(space[n], list) and not space[n] for n in names):
        raise EmptySpace("a choice list is empty")
    if all(isinstance(space[n], list) for n in names):
        grid = list(itertools.product(*(space[n] for n in names)))
        if budget >= len(grid):
            return [dict(zip(names, grid[i])) for i in rng.permutation(len(grid))]
    out = []
    for _ in range(budget):
        cfg = {}
        for name in names:
            spec = space[name]
            if isinstance(spec, list):
                cfg[name] = spec[int(rng.integers(len(spec)))]
                continue
            lo, hi, *mode = spec
            mode = mode[0] if mode else "float"
            if mode == "int":
                cfg[name] = int(rng.integers(int(lo), int(hi) + 1))
            elif mode == "log":
                cfg[name] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            else:
                cfg[name] = float(rng.uniform(lo, hi))
        out.append(cfg)
    return out


def hyperparameter_search(space: dict, budget: int, evaluate, seed: int = 0) -> tuple:
    """Seeded random search; returns ``(best_config, best_score, trajectory)``.

    ``evaluate`` maps a configuration dict to a score to maximise. The first
    sampled configuration wins ties.
    """
    best, best_score, trail = None, -np.inf, []
    for cfg in sample_space(space, budget, seed):
        score = float(evaluate(cfg))
        trail.append((cfg, score))
        if score > best_score:
            best, best_score = cfg, score
    return best, best_score, trail


GBDT_SPACE = {
    "max_leaves": (8, 48, "int"),
    "learning_rate": (0.05, 0.3, "log"),
    "min_samples_leaf": (5, 40, "int"),
    "lam": (0.1, 10.0, "log"),
}


def apply_gbdt_params(settings: ModelSettings, params: dict) -> ModelSettings:
    return replace(settings, gbdt=replace(settings.gbdt, **params))
