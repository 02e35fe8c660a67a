"""Histogram gradient-boosted decision trees."""
from .binning import BinMapper, fit_bins
from .boosting import (
    GBDTConfig,
    GBDTModel,
    goss_select,
    predict_proba,
    softmax,
    softmax_objective,
    train,
)
from .tree import Histogram, SplitInfo, Tree, best_split, build_histogram, grow_tree, split_gain
