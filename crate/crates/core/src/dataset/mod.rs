//! Dataset manifests, statistics, balanced test-split curation and
//! consistency checks.

mod curate;
mod manifest;
mod scan;
mod stats;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::scene::{SceneKind, Weather};

pub use curate::{curate, selection_key, CurationConfig, CurationFilters, Quotas, ShortCell};
pub use manifest::{read_manifest, write_manifest, ManifestEntry, Split, MANIFEST_FILE};
pub use scan::{scan_dataset, ScanReport, ScanWarning};
pub use stats::{compute_stats, DatasetStats, HEATMAP_H, HEATMAP_SCALE, HEATMAP_W, HIST_BINS, HIST_MAX};
pub use validate::{validate, validate_manifest_file, Violation, ViolationKind};

/// Absolute difference tolerated between stored and recomputed fractions.
pub const FRACTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("quotas sum to {sum}, target is {target}")]
    QuotaSum { sum: usize, target: usize },
    #[error("infeasible quota in {} cell(s)", .0.len())]
    InfeasibleQuota(Vec<ShortCell>),
    #[error("{0}")]
    Invalid(String),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        DatasetError::Io { path: path.into(), reason: e.to_string() }
    }
}

/// Row-major index of a scene×weather cell (scene major).
pub fn cell_index(scene: SceneKind, weather: Weather) -> usize {
    scene.index() * Weather::ALL.len() + weather.index()
}
