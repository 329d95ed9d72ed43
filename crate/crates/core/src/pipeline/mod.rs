//! End-to-end orchestration: box sampling per map, image synthesis with a
//! resumable journal, dataset-level refinement and evaluation.

mod evaluate;
mod generate;
mod journal;
mod refine;
mod toy;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::CompositorError;
use crate::dataset::DatasetError;
use crate::genclient::GenError;
use crate::hashing::derive_seed;
use crate::metrics::MetricError;
use crate::placer::{sample_pseudo_boxes, BoxSet, PlacerError, SamplerConfig};
use crate::scene::{extract_drivable_region, LabelSchema, SceneAttributes, SceneError, SceneKind, SemanticMap, TimeOfDay, Weather};

pub use evaluate::{evaluate, find_score_map, EvalConfig, EvalOutcome};
pub use generate::{run_generation, synthesize, Engine, GenerationConfig, GenerationInputs, RunSummary, Synthesized, RUN_FILE};
pub use journal::{Journal, JOURNAL_FILE};
pub use refine::refine_dataset;
pub use toy::{toy_attributes, toy_id, toy_map, write_toy_scenes, ToyConfig};

/// Label schema stored next to semantic maps.
pub const SCHEMA_FILE: &str = "schema.txt";
/// Per-map scene attributes stored next to semantic maps.
pub const SCENE_INDEX_FILE: &str = "scenes.jsonl";
/// Extension of box-set files written by [`sample_boxes`].
pub const BOXES_EXT: &str = "boxes";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{0}")]
    Data(String),
    #[error("{} score maps missing, first {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingScores(Vec<String>),
    #[error("{context}: {source}")]
    Backend { context: String, source: GenError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Placer(#[from] PlacerError),
    #[error(transparent)]
    Compositor(#[from] CompositorError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        PipelineError::Io { path: path.into(), reason: e.to_string() }
    }
}

/// One semantic map and the attributes of the scene it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    /// File name of the map inside its directory.
    pub map: String,
    #[serde(flatten)]
    pub attributes: SceneAttributes,
}

impl SceneRecord {
    pub fn stem(&self) -> &str {
        self.map.strip_suffix(".png").unwrap_or(&self.map)
    }
}

pub fn write_scene_index(dir: &Path, records: &[SceneRecord]) -> Result<(), PipelineError> {
    let path = dir.join(SCENE_INDEX_FILE);
    let mut text = Vec::new();
    for r in records {
        serde_json::to_writer(&mut text, r).map_err(|e| PipelineError::io(&path, e))?;
        text.write_all(b"\n").map_err(|e| PipelineError::io(&path, e))?;
    }
    write_atomic(&path, &text)
}

/// Semantic maps of a directory in file-name order.
///
/// Attributes come from the directory's scene index; maps it does not list
/// default to a clear daytime city street. The schema is `schema` when
/// given, else the directory's schema file, else the default table.
pub fn load_scenes(dir: &Path, schema: Option<&LabelSchema>) -> Result<(LabelSchema, Vec<SceneRecord>), PipelineError> {
    let schema = match schema {
        Some(s) => s.clone(),
        None if dir.join(SCHEMA_FILE).is_file() => LabelSchema::load(&dir.join(SCHEMA_FILE))?,
        None => LabelSchema::default(),
    };
    let index_path = dir.join(SCENE_INDEX_FILE);
    let mut index: BTreeMap<String, SceneRecord> = BTreeMap::new();
    if index_path.is_file() {
        let text = std::fs::read_to_string(&index_path).map_err(|e| PipelineError::io(&index_path, e))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: SceneRecord = serde_json::from_str(line)
                .map_err(|e| PipelineError::Data(format!("{} line {}: {e}", index_path.display(), i + 1)))?;
            index.insert(r.map.clone(), r);
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    let records = names
        .into_iter()
        .map(|name| {
            index.remove(&name).unwrap_or_else(|| {
                warn!("{name}: not in {SCENE_INDEX_FILE}, assuming a clear daytime city street");
                SceneRecord { map: name, attributes: SceneAttributes::new(SceneKind::CityStreet, Weather::Clear, TimeOfDay::Daytime) }
            })
        })
        .collect();
    for name in index.keys() {
        warn!("{name}: listed in {SCENE_INDEX_FILE} but missing");
    }
    Ok((schema, records))
}

/// Seed of the box set sampled for a map.
pub fn boxes_seed(seed: u64, stem: &str) -> u64 {
    derive_seed(seed, &format!("boxes/{stem}"))
}

/// Pseudo boxes for one map inside its drivable region.
pub fn boxes_for_map(map: &SemanticMap, cfg: &SamplerConfig, seed: u64, stem: &str) -> Result<BoxSet, PipelineError> {
    let region = extract_drivable_region(map, map.schema().drivable_ids())?;
    Ok(sample_pseudo_boxes(&region, cfg, boxes_seed(seed, stem))?)
}

/// Samples and writes `<out>/<stem>.boxes` for every map in `maps_dir`.
pub fn sample_boxes(
    maps_dir: &Path,
    schema: Option<&LabelSchema>,
    cfg: &SamplerConfig,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    use rayon::prelude::*;
    let (schema, records) = load_scenes(maps_dir, schema)?;
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    records
        .par_iter()
        .map(|r| {
            let map = SemanticMap::load(&maps_dir.join(&r.map), &schema)?;
            let set = boxes_for_map(&map, cfg, seed, r.stem()).map_err(|e| PipelineError::Data(format!("{}: {e}", r.map)))?;
            let path = out.join(format!("{}.{BOXES_EXT}", r.stem()));
            write_atomic(&path, set.to_text().as_bytes())?;
            Ok(path)
        })
        .collect()
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}
