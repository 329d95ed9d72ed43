use std::collections::HashSet;
use std::path::Path;

use image::DynamicImage;
use rayon::prelude::*;
use serde::Serialize;

use super::{manifest::MANIFEST_FILE, scan::manifest_root, ManifestEntry, Split, FRACTION_TOLERANCE};
use crate::compositor::{pixel_fraction, AnomalyMask, MASK_ANOMALY, MASK_BACKGROUND, MASK_IGNORE};
use crate::imageio;
use crate::scene::{SceneKind, TimeOfDay, Weather};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Parse { reason: String },
    InvalidEnum { field: String, value: String },
    MissingImage,
    MissingMask,
    Unreadable { reason: String },
    DimensionMismatch { image: (u32, u32), mask: (u32, u32) },
    IllegalMaskValue { value: u8 },
    FractionOutOfRange { stored: f64 },
    FractionMismatch { stored: f64, actual: f64 },
    DuplicatePath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 1-based manifest line, when known.
    pub line: Option<usize>,
    pub image_path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        write!(f, "{}: ", self.image_path)?;
        match &self.kind {
            ViolationKind::Parse { reason } => write!(f, "parse error: {reason}"),
            ViolationKind::InvalidEnum { field, value } => write!(f, "invalid {field} {value:?}"),
            ViolationKind::MissingImage => write!(f, "image file missing"),
            ViolationKind::MissingMask => write!(f, "mask file missing"),
            ViolationKind::Unreadable { reason } => write!(f, "unreadable: {reason}"),
            ViolationKind::DimensionMismatch { image, mask } => write!(f, "image {image:?} vs mask {mask:?}"),
            ViolationKind::IllegalMaskValue { value } => write!(f, "illegal mask value {value}"),
            ViolationKind::FractionOutOfRange { stored } => write!(f, "pixel_fraction {stored} outside [0,1]"),
            ViolationKind::FractionMismatch { stored, actual } => write!(f, "pixel_fraction {stored} but mask gives {actual}"),
            ViolationKind::DuplicatePath => write!(f, "listed more than once"),
        }
    }
}

fn check_entry(e: &ManifestEntry, root: &Path) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    if !(0.0..=1.0).contains(&e.pixel_fraction) || !e.pixel_fraction.is_finite() {
        out.push(ViolationKind::FractionOutOfRange { stored: e.pixel_fraction });
    }
    let (img_path, mask_path) = (e.image_abs(root), e.mask_abs(root));
    let image_dims = if img_path.is_file() {
        match image::image_dimensions(&img_path) {
            Ok(d) => Some(d),
            Err(err) => {
                out.push(ViolationKind::Unreadable { reason: format!("{}: {err}", e.image_path) });
                None
            }
        }
    } else {
        out.push(ViolationKind::MissingImage);
        None
    };
    if !mask_path.is_file() {
        out.push(ViolationKind::MissingMask);
        return out;
    }
    let gray = match imageio::read(&mask_path) {
        Ok(DynamicImage::ImageLuma8(g)) => g,
        Ok(other) => {
            out.push(ViolationKind::Unreadable { reason: format!("{}: mask is {:?}, not 8-bit gray", e.mask_path, other.color()) });
            return out;
        }
        Err(err) => {
            out.push(ViolationKind::Unreadable { reason: format!("{}: {err}", e.mask_path) });
            return out;
        }
    };
    if let Some(d) = image_dims.filter(|&d| d != gray.dimensions()) {
        out.push(ViolationKind::DimensionMismatch { image: d, mask: gray.dimensions() });
    }
    if let Some(&v) = gray.as_raw().iter().find(|&&v| !matches!(v, MASK_BACKGROUND | MASK_IGNORE | MASK_ANOMALY)) {
        out.push(ViolationKind::IllegalMaskValue { value: v });
        return out;
    }
    let (w, h) = gray.dimensions();
    let mask = AnomalyMask::new(w as usize, h as usize, gray.into_raw()).expect("values checked");
    match pixel_fraction(&mask) {
        Ok(actual) if (actual - e.pixel_fraction).abs() > FRACTION_TOLERANCE => {
            out.push(ViolationKind::FractionMismatch { stored: e.pixel_fraction, actual })
        }
        Ok(_) => {}
        Err(err) => out.push(ViolationKind::Unreadable { reason: err.to_string() }),
    }
    out
}

/// File existence, image/mask sizes, mask values and fraction consistency
/// for every entry. Paths resolve against `root`.
pub fn validate(entries: &[ManifestEntry], root: &Path) -> Vec<Violation> {
    validate_lines(&entries.iter().enumerate().map(|(i, e)| (Some(i + 1), e.clone())).collect::<Vec<_>>(), root)
}

fn validate_lines(entries: &[(Option<usize>, ManifestEntry)], root: &Path) -> Vec<Violation> {
    let mut out: Vec<Violation> = entries
        .par_iter()
        .flat_map_iter(|(line, e)| {
            check_entry(e, root).into_iter().map(|kind| Violation { line: *line, image_path: e.image_path.clone(), kind })
        })
        .collect();
    let mut seen = HashSet::new();
    for (line, e) in entries {
        if !seen.insert(e.image_path.as_str()) {
            out.push(Violation { line: *line, image_path: e.image_path.clone(), kind: ViolationKind::DuplicatePath });
        }
    }
    out.sort_by_key(|v| v.line);
    out
}

fn enum_ok(field: &str, v: &str) -> bool {
    match field {
        "scene" => v.parse::<SceneKind>().is_ok(),
        "weather" => v.parse::<Weather>().is_ok(),
        "time_of_day" => v.parse::<TimeOfDay>().is_ok(),
        _ => Split::from_ident(v).is_some(),
    }
}

/// Validates a manifest file, reporting malformed lines and illegal enum
/// values as violations instead of failing.
pub fn validate_manifest_file(path: &Path) -> Vec<Violation> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| MANIFEST_FILE.into());
            return vec![Violation { line: None, image_path: name, kind: ViolationKind::Unreadable { reason: e.to_string() } }];
        }
    };
    let mut violations = Vec::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line = Some(i + 1);
        let value: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => {
                violations.push(Violation { line, image_path: String::new(), kind: ViolationKind::Parse { reason: e.to_string() } });
                continue;
            }
        };
        let image_path = value.get("image_path").and_then(|v| v.as_str()).unwrap_or_default().to_string();
        let mut bad_enum = false;
        for field in ["scene", "weather", "time_of_day", "split"] {
            let v = value.get(field).and_then(|v| v.as_str()).unwrap_or_default();
            if !enum_ok(field, v) {
                bad_enum = true;
                violations.push(Violation {
                    line,
                    image_path: image_path.clone(),
                    kind: ViolationKind::InvalidEnum { field: field.into(), value: v.into() },
                });
            }
        }
        if bad_enum {
            continue;
        }
        match serde_json::from_value::<ManifestEntry>(value) {
            Ok(e) => entries.push((line, e)),
            Err(e) => violations.push(Violation { line, image_path, kind: ViolationKind::Parse { reason: e.to_string() } }),
        }
    }
    violations.extend(validate_lines(&entries, &manifest_root(path)));
    violations.sort_by_key(|v| v.line);
    violations
}
