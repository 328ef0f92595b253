//! Token metrics, paragraph accuracy, layer/threshold sweeps and the
//! position and disambiguation analyses, plus their report files.

mod analysis;
mod metrics;
mod report;
mod source;
mod sweep;

pub use analysis::{
    bucket_of, disambiguation_report, disambiguation_subset, position_buckets, random_baseline, Bucket,
    DisambiguationItem, DisambiguationReport, PositionBucketReport, SpanPosition, BUCKET_COUNT,
};
pub use metrics::{
    f1_of, overlap_mask, paragraph_accuracy, pr_curve, pr_curve_pooled, token_counts, token_prf, Counts,
    MetricsReport, PrPoint, SampleMetrics,
};
pub use report::{
    write_buckets_csv, write_grid_csv, write_layers_csv, write_pr_csv, write_report_json, BUCKETS_CSV, GRID_CSV,
    LAYERS_CSV, PR_CURVE_CSV, REPORT_JSON, REPORT_SCHEMA_VERSION,
};
pub use source::{InMemoryTraces, SampleTrace, TraceDirectory, TraceSource};
pub use sweep::{
    answer_token_ranges, sweep_subtask1, sweep_subtask2, token_span, GridCell, LayerAccuracy, SkippedSample, SpanOutcome,
    Subtask1Sweep, Subtask2Sweep,
};

use crate::trace::TraceError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("answer has zero length")]
    ZeroLengthAnswer,
    #[error("no trace for sample {0:?}")]
    MissingTrace(String),
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
