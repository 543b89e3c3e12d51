"""Evaluation toolkit for sound event localization and detection outputs."""

from .annotations import (
    EventRecord,
    FrameSnapshot,
    SegmentView,
    Vocabulary,
    densify,
    parse_prediction,
    parse_reference,
    parse_vocabulary,
    rasterize,
    segmentize,
    write_prediction,
    write_reference,
)
from .assignment import (
    Assignment,
    DistanceMatrix,
    ThresholdMask,
    build_distance_matrix,
    hungarian,
    threshold_mask,
)
from .detection import DetectionCounts, detection_counts, error_rate, f1_score
from .errors import SeldEvalError
from .evaluation import (
    EvaluationConfig,
    EvaluationResult,
    FileContribution,
    MetricReport,
    compute_metrics,
    correlate_systems,
    evaluate_directory,
    metric_directions,
    rank_systems,
    score_file,
)
from .geometry import (
    Direction,
    UnitVector3,
    angular_distance,
    cartesian_distance,
    spherical_mean,
)
from .joint import (
    ClassCounts,
    ClassSlice,
    class_aware_localization,
    class_slices,
    joint_counts,
    location_aware_detection,
    segment_class_counts,
)
from .localization import LocalizationReport, localization_metrics
from .stats import (
    JackknifeEstimate,
    RankTable,
    build_rank_table,
    cumulative_rank,
    jackknife_ci,
    metric_ranks,
    spearman,
)
from .synth import PerturbationSpec, grid_directions, jitter_direction, perturb, serialize_prediction

__version__ = "0.1.0"
