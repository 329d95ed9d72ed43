use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{read_manifest, DatasetError, ManifestEntry, Split, MANIFEST_FILE};
use crate::compositor::{pixel_fraction, AnomalyMask};
use crate::scene::{SceneKind, Weather};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScanWarning {
    /// Image without its `_mask.png` sibling.
    OrphanImage(String),
    OrphanMask(String),
    /// PNG outside the `<split>/<scene>/<weather>/<id>.png` layout.
    UnexpectedPath(String),
    UnreadableMask { path: String, reason: String },
}

impl std::fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanWarning::OrphanImage(p) => write!(f, "{p}: no mask"),
            ScanWarning::OrphanMask(p) => write!(f, "{p}: no image"),
            ScanWarning::UnexpectedPath(p) => write!(f, "{p}: not <split>/<scene>/<weather>/<id>.png"),
            ScanWarning::UnreadableMask { path, reason } => write!(f, "{path}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub entries: Vec<ManifestEntry>,
    pub warnings: Vec<ScanWarning>,
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> Result<(), DatasetError> {
    for entry in std::fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "png") {
            let rel = path.strip_prefix(root).expect("under root");
            out.insert(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

fn parse_layout(rel: &str) -> Option<(Split, SceneKind, Weather)> {
    let parts: Vec<&str> = rel.split('/').collect();
    let [split, scene, weather, _] = parts[..] else {
        return None;
    };
    Some((Split::from_ident(split)?, scene.parse().ok()?, weather.parse().ok()?))
}

/// Discovers image/mask pairs under `root`.
///
/// Metadata the file layout cannot carry (categories, time of day, stored
/// fraction, refinement flag, assigned split) is taken from
/// `root/manifest.jsonl` when present. Fractions are computed from the
/// masks when `recompute` is set or when no stored value exists.
pub fn scan_dataset(root: &Path, recompute: bool) -> Result<ScanReport, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::io(root, "not a directory"));
    }
    let mut files = BTreeSet::new();
    walk(root, root, &mut files)?;
    let manifest_path = root.join(MANIFEST_FILE);
    let stored: BTreeMap<String, ManifestEntry> = if manifest_path.is_file() {
        read_manifest(&manifest_path)?.into_iter().map(|e| (e.image_path.clone(), e)).collect()
    } else {
        BTreeMap::new()
    };

    let mut report = ScanReport::default();
    let mut pending: Vec<(ManifestEntry, bool)> = Vec::new();
    for rel in &files {
        if let Some(stem) = rel.strip_suffix("_mask.png") {
            if !files.contains(&format!("{stem}.png")) {
                report.warnings.push(ScanWarning::OrphanMask(rel.clone()));
            }
            continue;
        }
        let Some((split, scene, weather)) = parse_layout(rel) else {
            report.warnings.push(ScanWarning::UnexpectedPath(rel.clone()));
            continue;
        };
        let mask_path = format!("{}_mask.png", rel.strip_suffix(".png").expect("png"));
        if !files.contains(&mask_path) {
            report.warnings.push(ScanWarning::OrphanImage(rel.clone()));
            continue;
        }
        let (entry, known) = match stored.get(rel) {
            Some(s) => (ManifestEntry { mask_path, scene, weather, ..s.clone() }, true),
            None => (
                ManifestEntry {
                    image_path: rel.clone(),
                    mask_path,
                    scene,
                    weather,
                    time_of_day: weather.default_time_of_day(),
                    categories: vec![],
                    pixel_fraction: 0.0,
                    split,
                    refined: false,
                },
                false,
            ),
        };
        pending.push((entry, recompute || !known));
    }

    let results: Vec<Result<ManifestEntry, ScanWarning>> = pending
        .into_par_iter()
        .map(|(mut e, fresh)| {
            if fresh {
                let m = AnomalyMask::load(&e.mask_abs(root))
                    .map_err(|err| ScanWarning::UnreadableMask { path: e.mask_path.clone(), reason: err.to_string() })?;
                e.pixel_fraction = pixel_fraction(&m).unwrap_or(0.0);
            }
            Ok(e)
        })
        .collect();
    for r in results {
        match r {
            Ok(e) => report.entries.push(e),
            Err(w) => report.warnings.push(w),
        }
    }
    Ok(report)
}

/// Directory that relative paths in `manifest` resolve against.
pub(crate) fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositor::SceneImage;

    fn pair(root: &Path, rel: &str, anomalies: usize) {
        SceneImage::filled(10, 10, [1, 2, 3]).save(&root.join(format!("{rel}.png"))).unwrap();
        let mut v = vec![0u8; 100];
        v[..anomalies].fill(255);
        AnomalyMask::new(10, 10, v).unwrap().save(&root.join(format!("{rel}_mask.png"))).unwrap();
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let r = scan_dataset(dir.path(), false).unwrap();
        assert!(r.entries.is_empty() && r.warnings.is_empty());
    }

    #[test]
    fn pairs_and_orphan() {
        let dir = tempfile::tempdir().unwrap();
        pair(dir.path(), "unassigned/tunnel/rain/a", 5);
        pair(dir.path(), "unassigned/tunnel/rain/b", 2);
        pair(dir.path(), "test/highway/night/c", 0);
        SceneImage::filled(4, 4, [0; 3]).save(&dir.path().join("unassigned/tunnel/rain/d.png")).unwrap();
        let r = scan_dataset(dir.path(), true).unwrap();
        assert_eq!(r.entries.len(), 3);
        assert_eq!(r.warnings, vec![ScanWarning::OrphanImage("unassigned/tunnel/rain/d.png".into())]);
        let c = r.entries.iter().find(|e| e.id() == "c").unwrap();
        assert_eq!((c.split, c.scene, c.weather), (Split::Test, SceneKind::Highway, Weather::Night));
        let a = r.entries.iter().find(|e| e.id() == "a").unwrap();
        assert_eq!(a.pixel_fraction, 0.05);
    }
}
