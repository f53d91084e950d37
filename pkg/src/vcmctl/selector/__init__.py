"""GoP structure selection from pre-analysis features."""

from .features import (
    FEATURE_NAMES,
    FlowStats,
    FrameAnalysis,
    PreAnalysisInput,
    aggregate_features,
    analyze_frame,
    box_mask,
    flow_stats,
)
from .flow import block_matching_flow
from .model import (
    assemble,
    load_weights,
    materialize,
    predict,
    save_weights,
    score,
    select_structure,
    split_mini_gops,
    zero_weights,
)
from .training import TrainingDiverged, TrainResult, train_selector

__all__ = [
    "FEATURE_NAMES",
    "FlowStats",
    "FrameAnalysis",
    "PreAnalysisInput",
    "TrainResult",
    "TrainingDiverged",
    "aggregate_features",
    "analyze_frame",
    "assemble",
    "block_matching_flow",
    "box_mask",
    "flow_stats",
    "load_weights",
    "materialize",
    "predict",
    "save_weights",
    "score",
    "select_structure",
    "split_mini_gops",
    "train_selector",
    "zero_weights",
]
