"""Regression trees on binned features grown leaf-wise on second-order statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .kernels import build_histograms, find_best_split, gain, partition, predict_tree


class Histogram(NamedTuple):
    """Per-feature, per-bin sums; the last slot of every row is the missing bin."""

    grad: np.ndarray
    hess: np.ndarray
    count: np.ndarray

    def __sub__(self, other: "Histogram") -> "Histogram":
        return Histogram(self.grad - other.grad, self.hess - other.hess, self.count - other.count)

    def __add__(self, other: "Histogram") -> "Histogram":
        return Histogram(self.grad + other.grad, self.hess + other.hess, self.count + other.count)


class SplitInfo(NamedTuple):
    feature: int
    bin: int
    missing_left: bool
    gain: float


def split_gain(G_L: float, H_L: float, G_R: float, H_R: float, lam: float, gamma: float) -> float:
    """Regularised second-order gain of splitting a node into (L, R)."""
    return float(gain(float(G_L), float(H_L), float(G_R), float(H_R), float(lam), float(gamma)))


def build_histogram(indices, Xb: np.ndarray, g, h, missing_bin: int, sample_weights=None) -> Histogram:
    """Histograms of all features over the rows in ``indices``; weights scale g and h."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if sample_weights is not None:
        w = np.asarray(sample_weights, dtype=float)
        g = g * w
        h = h * w
    idx = np.asarray(indices, dtype=np.int64)
    return Histogram(*build_histograms(np.ascontiguousarray(Xb), idx, g, h, missing_bin + 1))


def best_split(
    hist: Histogram,
    n_bins,
    missing_bin: int,
    lam: float = 1.0,
    gamma: float = 0.0,
    min_samples_leaf: int = 1,
) -> Optional[SplitInfo]:
    """Highest-gain split, or ``None`` if no split has positive gain.

    Rows with bin ``<= bin`` go left; missing rows follow ``missing_left``.
    Ties go to the lowest feature, then the lowest bin, then missing-left.
    """
    f, b, ml, v = find_best_split(
        hist.grad,
        hist.hess,
        hist.count,
        np.asarray(n_bins, dtype=np.int64),
        missing_bin,
        float(lam),
        float(gamma),
        max(1, int(min_samples_leaf)),
    )
    if f < 0:
        return None
    return SplitInfo(int(f), int(b), bool(ml), float(v))


@dataclass(eq=False)
class Tree:
    """Array-encoded binary tree; ``left[i] == -1`` marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    missing_left: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)
    n_samples: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    split_gains: list = field(default_factory=list)

    def add_node(self, value: float, n: int, depth: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0)
        self.missing_left.append(False)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.n_samples.append(int(n))
        self.depth.append(int(depth))
        return len(self.value) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for c in self.left if c < 0)

    @property
    def max_depth(self) -> int:
        return max(self.depth)

    def leaf_ids(self) -> list:
        return [i for i, c in enumerate(self.left) if c < 0]

    def arrays(self):
        if not hasattr(self, "_arrays"):
            self._arrays = (
                np.asarray(self.feature, dtype=np.int64),
                np.asarray(self.threshold, dtype=np.int64),
                np.asarray(self.missing_left, dtype=np.bool_),
                np.asarray(self.left, dtype=np.int64),
                np.asarray(self.right, dtype=np.int64),
                np.asarray(self.value, dtype=float),
            )
        return self._arrays

    def predict_binned(self, Xb: np.ndarray, missing_bin: int) -> np.ndarray:
        return predict_tree(np.ascontiguousarray(Xb), *self.arrays(), missing_bin)

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [int(v) for v in self.threshold],
            "missing_left": [bool(v) for v in self.missing_left],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
            "n_samples": [int(v) for v in self.n_samples],
            "depth": [int(v) for v in self.depth],
            "split_gains": [float(v) for v in self.split_gains],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(**{k: list(d[k]) for k in cls.__dataclass_fields__})


@dataclass(eq=False)
class _Leaf:
    node: int
    idx: np.ndarray
    hist: Histogram
    split: Optional[SplitInfo]
    order: int


def leaf_value(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def grow_tree(
    Xb: np.ndarray,
    g,
    h,
    n_bins,
    missing_bin: int,
    max_leaves: int = 31,
    max_depth: int = 8,
    min_samples_leaf: int = 20,
    lam: float = 1.0,
    gamma: float = 0.0,
    indices=None,
) -> Tree:
    """Grow one tree by always splitting the leaf with the largest gain.

    ``g`` and ``h`` are per-row gradients and Hessians with any sample
    weighting already folded in; ``indices`` restricts training to a subset
    of rows. Growth stops at ``max_leaves`` leaves or when no leaf within
    ``max_depth`` has a split of positive gain.
    """
    g = np.ascontiguousarray(g, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    Xb = np.ascontiguousarray(Xb)
    n_bins = np.asarray(n_bins, dtype=np.int64)
    idx = np.arange(len(g), dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
    slots = missing_bin + 1
    tree = Tree()

    def make_leaf(node_idx, hist, depth, order):
        node = tree.add_node(leaf_value(g[node_idx].sum(), h[node_idx].sum(), lam), len(node_idx), depth)
        split = None
        if depth < max_depth:
            split = best_split(hist, n_bins, missing_bin, lam, gamma, min_samples_leaf)
        return _Leaf(node, node_idx, hist, split, order)

    root_hist = Histogram(*build_histograms(Xb, idx, g, h, slots))
    frontier = [make_leaf(idx, root_hist, 0, 0)]
    counter = 1
    while len(tree.leaf_ids()) < max_leaves:
        candidates = [lf for lf in frontier if lf.split is not None]
        if not candidates:
            break
        # largest gain first, earliest-created leaf on ties
        leaf = max(candidates, key=lambda lf: (lf.split.gain, -lf.order))
        s = leaf.split
        li, ri = partition(Xb, leaf.idx, s.feature, s.bin, s.missing_left, missing_bin)
        small, large = (li, ri) if len(li) <= len(ri) else (ri, li)
        small_hist = Histogram(*build_histograms(Xb, small, g, h, slots))
        large_hist = leaf.hist - small_hist
        lh, rh = (small_hist, large_hist) if small is li else (large_hist, small_hist)
        depth = tree.depth[leaf.node] + 1
        left = make_leaf(li, lh, depth, counter)
        right = make_leaf(ri, rh, depth, counter + 1)
        counter += 2
        n = leaf.node
        tree.feature[n] = s.feature
        tree.threshold[n] = s.bin
        tree.missing_left[n] = s.missing_left
        tree.left[n] = left.node
        tree.right[n] = right.node
        tree.split_gains.append(s.gain)
        frontier.remove(leaf)
        frontier += [left, right]
    return tree
