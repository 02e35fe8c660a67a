"""End-to-end experiment orchestration."""
from .cv import CVResult, cross_validate, group_folds, hyperparameter_search, sample_space
from .dataset import FeatureCache, WindowSet, build_window_set
from .model import MODEL_KINDS, HybridModel, ModelSettings, Standardizer, derive_seed, fit_models, fuse
from .split import SplitSpec, default_split, location_split
from .sweep import ExperimentConfig, SweepResult, results_csv, results_text, sweep, write_results
