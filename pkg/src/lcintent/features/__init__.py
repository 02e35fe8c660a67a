"""Physics-informed feature extraction for lane-change intent windows."""
from .context import behavioral_features, ramp_features, safety_features
from .interaction import (
    NeighborStats,
    PositionStats,
    critical_gap_time,
    fit_neighbor_stats,
    interaction_features,
    resolve_neighbors,
)
from .kinematics import event_descriptors, kinematics_features, series_descriptors, temporal_descriptors
from .lane import lane_features
from .schema import (
    SCHEMA_RAMP,
    SCHEMA_STRAIGHT,
    FeatureVector,
    assemble,
    featurize_window,
    read_feature_csv,
    schema_for,
    stack,
    write_feature_csv,
)
