//! Anomaly placement: perspective-scaled pseudo boxes, box matching and the
//! localization loss, and placement plausibility checks.

mod geometry;
mod hungarian;
mod loss;
mod report;
mod sampler;

use thiserror::Error;

pub use geometry::{iou, match_cost, PixelRect, PseudoBox};
pub use hungarian::{hungarian_match, Assignment, AssignmentError};
pub use loss::{box_loss, box_set_loss, BoxLoss, PairTerms};
pub use report::{placement_report, PlacementReport};
pub use sampler::{
    perspective_height, sample_pseudo_boxes, sample_uniform_boxes, BoxSet, SamplerConfig, MAX_ATTEMPTS_PER_BOX,
};

use crate::metrics::StatsError;

#[derive(Debug, Error)]
pub enum PlacerError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("no valid placement for box {index} after {attempts} attempts")]
    InfeasibleConfig { index: usize, attempts: usize },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("box set is empty")]
    EmptySet,
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("boxset line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}
