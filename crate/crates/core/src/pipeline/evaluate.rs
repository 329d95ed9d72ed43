use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::PipelineError;
use crate::compositor::AnomalyMask;
use crate::dataset::{read_manifest, ManifestEntry, Split};
use crate::metrics::{grouped_report, Aggregation, EvalReport, GroupBy, GroupItem, MetricAccumulator, ScoreMap, DEFAULT_BINS};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub bins: usize,
    pub range: (f64, f64),
    /// Only entries of this split; `None` evaluates everything.
    pub split: Option<Split>,
    pub allow_missing: bool,
    pub group_by: Vec<GroupBy>,
    pub aggregation: Aggregation,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            range: (0.0, 1.0),
            split: Some(Split::Test),
            allow_missing: false,
            group_by: vec![GroupBy::Scene, GroupBy::Weather, GroupBy::SceneWeather, GroupBy::SceneCondition],
            aggregation: Aggregation::Pooled,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub reports: Vec<EvalReport>,
    /// Image paths without a score map.
    pub missing: Vec<String>,
    pub evaluated: usize,
}

/// Score map of an entry: `<scores>/<path>.csm` or `.png`, where `<path>`
/// is the image path with or without its split directory, or just the
/// image id.
pub fn find_score_map(scores: &Path, e: &ManifestEntry) -> Option<PathBuf> {
    let strip = |p: &str| p.strip_suffix(".png").unwrap_or(p).to_string();
    let stems = [strip(&e.image_path), strip(e.key()), e.id().to_string()];
    stems.iter().flat_map(|s| ["csm", "png"].map(|ext| scores.join(format!("{s}.{ext}")))).find(|p| p.is_file())
}

/// Scores every selected manifest entry against its mask and reports the
/// requested groupings plus the pooled result.
pub fn evaluate(manifest: &Path, scores: &Path, cfg: &EvalConfig) -> Result<EvalOutcome, PipelineError> {
    let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let entries: Vec<ManifestEntry> =
        read_manifest(manifest)?.into_iter().filter(|e| cfg.split.is_none_or(|s| e.split == s)).collect();
    let mut found = Vec::with_capacity(entries.len());
    let mut missing = Vec::new();
    for e in &entries {
        match find_score_map(scores, e) {
            Some(p) => found.push((e, p)),
            None => missing.push(e.image_path.clone()),
        }
    }
    if !missing.is_empty() && !cfg.allow_missing {
        return Err(PipelineError::MissingScores(missing));
    }
    let template = MetricAccumulator::new(cfg.bins, cfg.range)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| PipelineError::Config(e.to_string()))?;
    let accs: Vec<MetricAccumulator> = pool.install(|| {
        found
            .par_iter()
            .map(|(e, score_path)| {
                let s = ScoreMap::load(score_path, cfg.range)?;
                let mask_path = e.mask_abs(&root);
                let m = AnomalyMask::load(&mask_path).map_err(|err| PipelineError::io(&mask_path, err))?;
                let mut acc = template.empty_like();
                acc.accumulate(&s, &m).map_err(|err| PipelineError::Data(format!("{}: {err}", e.image_path)))?;
                Ok(acc)
            })
            .collect::<Result<_, PipelineError>>()
    })?;
    let items: Vec<GroupItem<'_>> =
        found.iter().zip(&accs).map(|((e, _), acc)| GroupItem { scene: e.scene, weather: e.weather, acc }).collect();
    let reports = grouped_report(&items, &cfg.group_by, cfg.aggregation)?;
    Ok(EvalOutcome { reports, missing, evaluated: found.len() })
}
