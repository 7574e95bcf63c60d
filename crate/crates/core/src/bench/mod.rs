//! Detection benchmark: IoU matching at a fixed threshold and
//! precision/recall/F-score per near/far range partition.

mod csv;
mod matching;
mod metrics;
mod report;

pub use self::csv::{
    format_annotations, parse_annotations, parse_detections, parse_ground_truth, AnnotationRecord, ANNOTATION_HEADER,
    DETECTION_HEADER, GROUND_TRUTH_HEADER,
};
pub use matching::{iou, match_detections, DetectionRecord, GroundTruthRecord, Match, MatchResult, RangeTag};
pub use metrics::{compute_metrics, round1, Metrics};
pub use report::{evaluate, evaluate_records, EvalReport, RangeReport};

/// The true-positive criterion: IoU of at least 50 %.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
