"""Timestamp-aware stalled-vehicle anomaly detection for traffic videos."""

from .background import (
    BackgroundConfig,
    BackgroundImage,
    FrameStack,
    MedianEstimator,
    PatchGrid,
    ReferenceBackground,
    estimate_backgrounds,
    reference_background,
    sample_stack,
    split_patches,
    stitch_patches,
    temporal_median,
)
from .detect import (
    Detection,
    DetectorConfig,
    Label,
    LabelSequence,
    derive_labels,
    detect_static_objects,
    load_detections,
)
from .errors import DataError, UsageError
from .media import Frame, VideoSource, load_frame, load_frame_sequence, to_grayscale, write_frame
from .metrics import (
    EvalReport,
    GroundTruth,
    MatchConfig,
    MatchedPairs,
    evaluate,
    f1_score,
    match_predictions,
    rmse,
    s3_score,
)
from .smoothing import (
    AnomalyResult,
    SmoothingTrace,
    extract_timestamp,
    smooth,
    smooth_fast,
    step1_local_majority,
    step2_block_vote,
    step3_edge_vote,
)

__version__ = "0.1.0"
