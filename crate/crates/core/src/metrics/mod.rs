//! Pixel-level OoD metrics: streaming histogram engine, exact oracle,
//! correlation and grouped reporting.

mod accumulator;
mod exact;
mod pearson;
mod report;
mod score_map;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use accumulator::{MetricAccumulator, DEFAULT_BINS};
pub use exact::{exact_metrics, EXACT_MAX_LEN};
pub use pearson::{pearson, StatsError};
pub use report::{
    grouped_report, render_scene_weather_table, render_text, Aggregation, Condition, EvalReport, GroupBy, GroupItem, GroupKey,
    TABLE_SCENES,
};
pub use score_map::{ScoreMap, CSM_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub auroc: f64,
    pub ap: f64,
    pub fpr95: f64,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("need both classes, got {pos} positive and {neg} negative pixels")]
    DegenerateClass { pos: u64, neg: u64 },
    #[error("score/mask size mismatch ({scores} vs {mask})")]
    DimensionMismatch { scores: usize, mask: usize },
    #[error("accumulators have different bins or ranges")]
    Incompatible,
    #[error("invalid score range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("accumulator range {acc:?} does not cover declared score range {scores:?}")]
    RangeNotCovered { acc: (f64, f64), scores: (f64, f64) },
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("{0} entries exceed the exact-metric limit")]
    TooLarge(usize),
    #[error("score map format: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}
