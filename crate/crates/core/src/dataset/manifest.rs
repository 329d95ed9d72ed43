use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::scene::{SceneKind, TimeOfDay, Weather};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Unassigned];

    pub fn ident(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }

    pub fn from_ident(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|v| v.ident() == s)
    }
}

/// One image/mask pair. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub mask_path: String,
    pub scene: SceneKind,
    pub weather: Weather,
    pub time_of_day: TimeOfDay,
    #[serde(default)]
    pub categories: Vec<String>,
    pub pixel_fraction: f64,
    pub split: Split,
    /// Mask went through `refine_mask`.
    #[serde(default)]
    pub refined: bool,
}

impl ManifestEntry {
    /// Image path without a leading split directory; stable when the
    /// split changes.
    pub fn key(&self) -> &str {
        match self.image_path.split_once('/') {
            Some((head, rest)) if Split::from_ident(head).is_some() => rest,
            _ => &self.image_path,
        }
    }

    /// File stem of the image.
    pub fn id(&self) -> &str {
        let name = self.image_path.rsplit('/').next().unwrap_or(&self.image_path);
        name.strip_suffix(".png").unwrap_or(name)
    }

    pub fn image_abs(&self, root: &Path) -> PathBuf {
        root.join(&self.image_path)
    }

    pub fn mask_abs(&self, root: &Path) -> PathBuf {
        root.join(&self.mask_path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse { path: path.into(), line: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Writes one JSON object per line through a temporary file and rename.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let err = |e: std::io::Error| DatasetError::io(path, e);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(err)?);
        for e in entries {
            serde_json::to_writer(&mut f, e).map_err(|e| DatasetError::io(path, e))?;
            f.write_all(b"\n").map_err(err)?;
        }
        f.into_inner().map_err(|e| err(e.into_error()))?.sync_all().map_err(err)?;
    }
    std::fs::rename(&tmp, path).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn entry(path: &str) -> ManifestEntry {
        ManifestEntry {
            image_path: path.into(),
            mask_path: path.replace(".png", "_mask.png"),
            scene: SceneKind::Tunnel,
            weather: Weather::Rain,
            time_of_day: TimeOfDay::Daytime,
            categories: vec!["dog".into()],
            pixel_fraction: 0.0237,
            split: Split::Unassigned,
            refined: true,
        }
    }

    #[test]
    fn keys_and_ids() {
        let e = entry("test/tunnel/rain/000012.png");
        assert_eq!(e.key(), "tunnel/rain/000012.png");
        assert_eq!(e.id(), "000012");
        assert_eq!(entry("extra/a.png").key(), "extra/a.png");
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let es = vec![entry("unassigned/tunnel/rain/a.png"), entry("unassigned/tunnel/rain/b.png")];
        write_manifest(&p, &es).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"split\":\"unassigned\"") && text.contains("\"scene\":\"tunnel\""));
        assert_eq!(read_manifest(&p).unwrap(), es);
    }

    #[test]
    fn parse_error_has_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        std::fs::write(&p, "{}\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(DatasetError::Parse { line: 1, .. })));
    }
}
