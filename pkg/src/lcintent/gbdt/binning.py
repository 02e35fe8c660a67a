"""Quantile binning of continuous features into small integer codes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMatrix, ValidationError

MAX_BINS_LIMIT = 255


@dataclass(frozen=True, eq=False)
class BinMapper:
    """Per-feature upper bin boundaries.

    Feature ``k`` has ``len(boundaries[k]) + 1`` finite bins: value ``x``
    lands in the first bin ``v`` with ``x <= boundaries[k][v]``, or in the
    last (overflow) bin. Missing values (NaN) go to bin ``missing_bin``,
    which equals ``max_bins`` for every feature.
    """

    max_bins: int
    boundaries: tuple

    @property
    def missing_bin(self) -> int:
        return self.max_bins

    @property
    def n_features(self) -> int:
        return len(self.boundaries)

    @property
    def n_bins(self) -> np.ndarray:
        """Finite bin count per feature."""
        return np.array([len(b) + 1 for b in self.boundaries], dtype=np.int64)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} columns, got shape {X.shape}")
        out = np.empty(X.shape, dtype=np.uint8)
        for k, b in enumerate(self.boundaries):
            col = X[:, k]
            codes = np.searchsorted(b, col, side="left")
            codes[np.isnan(col)] = self.missing_bin
            out[:, k] = codes
        return out

    def to_dict(self) -> dict:
        return {"max_bins": self.max_bins, "boundaries": [[float(v) for v in b] for b in self.boundaries]}

    @classmethod
    def from_dict(cls, d: dict) -> "BinMapper":
        return cls(int(d["max_bins"]), tuple(np.asarray(b, dtype=float) for b in d["boundaries"]))


def _feature_boundaries(values: np.ndarray, max_bins: int) -> np.ndarray:
    distinct = np.unique(values)
    if len(distinct) <= max_bins:
        # one bin per distinct value, cut halfway between neighbours
        return 0.5 * (distinct[:-1] + distinct[1:])
    qs = np.percentile(values, np.linspace(0, 100, max_bins + 1)[1:-1], method="midpoint")
    cuts = np.unique(qs)
    # a cut equal to the maximum would leave the overflow bin empty
    return cuts[cuts < distinct[-1]]


def fit_bins(X, max_bins: int = MAX_BINS_LIMIT) -> BinMapper:
    """Bin boundaries at the empirical quantiles of each column's present values."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyMatrix("cannot fit bins on an empty matrix")
    if not 2 <= max_bins <= MAX_BINS_LIMIT:
        raise ValidationError(f"max_bins must be in [2, {MAX_BINS_LIMIT}]")
    bounds = []
    for k in range(X.shape[1]):
        col = X[:, k]
        present = col[~np.isnan(col)]
        bounds.append(_feature_boundaries(present, max_bins) if len(present) else np.empty(0))
    return BinMapper(max_bins, tuple(bounds))
