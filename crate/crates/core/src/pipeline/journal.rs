use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;

use super::PipelineError;
use crate::dataset::ManifestEntry;

pub const JOURNAL_FILE: &str = "journal.jsonl";

/// Append-only record of finished images. Each line is written after the
/// image and mask files are in place, under a single lock.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    /// Opens `<dir>/journal.jsonl` for appending and returns the entries it
    /// already holds, keyed by image path. A torn last line is dropped.
    pub fn open(dir: &Path) -> Result<(Self, BTreeMap<String, ManifestEntry>), PipelineError> {
        let path = dir.join(JOURNAL_FILE);
        let mut done = BTreeMap::new();
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
            let complete = text.rfind('\n').map_or("", |i| &text[..=i]);
            if complete.len() < text.len() {
                warn!("{}: dropping incomplete last line", path.display());
                std::fs::write(&path, complete).map_err(|e| PipelineError::io(&path, e))?;
            }
            for (i, line) in complete.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let e: ManifestEntry = serde_json::from_str(line)
                    .map_err(|e| PipelineError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
                done.insert(e.image_path.clone(), e);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok((Self { path, file: Mutex::new(file) }, done))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&self, entry: &ManifestEntry) -> Result<(), PipelineError> {
        let mut line = serde_json::to_vec(entry).map_err(|e| PipelineError::io(&self.path, e))?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line).and_then(|_| f.sync_data()).map_err(|e| PipelineError::io(&self.path, e))
    }
}
