use std::collections::BTreeMap;
use std::path::Path;

use super::{CompositorError, ObjectCutout};
use crate::hashing::keyed_hash64;

/// Concepts drawn procedurally by [`CutoutBank::builtin`].
pub const BUILTIN_CONCEPTS: [&str; 8] = ["dog", "sofa", "traffic cone", "tire", "rock", "cardboard box", "deer", "stroller"];

const SIZE: usize = 64;

/// Cutouts grouped by concept name.
#[derive(Debug, Clone, Default)]
pub struct CutoutBank {
    entries: BTreeMap<String, Vec<ObjectCutout>>,
}

fn in_ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
    dx * dx + dy * dy <= 1.0
}

fn in_rect(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
    (x0..x1).contains(&x) && (y0..y1).contains(&y)
}

/// Silhouette in unit coordinates, `y` growing downward, touching the bottom
/// edge so the object stands on the ground row.
fn silhouette(concept: &str, variant: u64) -> Box<dyn Fn(f64, f64) -> bool> {
    let j = (variant % 5) as f64 * 0.02;
    match concept {
        "dog" | "deer" => {
            let leg = if concept == "deer" { 0.45 } else { 0.3 };
            Box::new(move |x, y| {
                let body_y = 1.0 - leg - 0.15;
                in_ellipse(x, y, 0.45, body_y, 0.38 + j, 0.17)
                    || in_ellipse(x, y, 0.8, body_y - 0.2, 0.14, 0.13)
                    || [0.18, 0.3, 0.6, 0.7].iter().any(|&lx| in_rect(x, y, lx, body_y, lx + 0.07, 1.0))
            })
        }
        "sofa" => Box::new(move |x, y| {
            in_rect(x, y, 0.0, 0.45 + j, 1.0, 0.9) || in_rect(x, y, 0.05, 0.1, 0.95, 0.5) || in_rect(x, y, 0.05, 0.9, 0.12, 1.0)
                || in_rect(x, y, 0.88, 0.9, 0.95, 1.0)
        }),
        "traffic cone" => Box::new(move |x, y| {
            let half = 0.08 + 0.34 * y;
            (x - 0.5).abs() <= half && y >= 0.02 || in_rect(x, y, 0.02, 0.92 - j, 0.98, 1.0)
        }),
        "tire" => Box::new(move |x, y| {
            let (dx, dy) = (x - 0.5, y - 0.5);
            let r = (dx * dx + dy * dy).sqrt();
            r <= 0.5 && r >= 0.2 + j
        }),
        "cardboard box" => Box::new(move |x, y| in_rect(x, y, 0.03, 0.1 + j, 0.97, 1.0)),
        "stroller" => Box::new(move |x, y| {
            in_ellipse(x, y, 0.5, 0.35, 0.4, 0.3 + j)
                || in_rect(x, y, 0.15, 0.55, 0.85, 0.75)
                || in_ellipse(x, y, 0.25, 0.88, 0.12, 0.12)
                || in_ellipse(x, y, 0.75, 0.88, 0.12, 0.12)
        }),
        _ => Box::new(move |x, y| {
            let a = (x - 0.5).atan2(y - 0.5);
            let rad = 0.42 + 0.06 * (3.0 * a).sin() + j;
            in_ellipse(x, y, 0.5, 0.5, rad, 0.5)
        }),
    }
}

/// Deterministic procedural cutout for `concept`.
pub fn procedural_cutout(concept: &str, variant: u64) -> ObjectCutout {
    let key = keyed_hash64(variant, concept.as_bytes());
    let base = [(key & 0xff) as f64, ((key >> 8) & 0xff) as f64, ((key >> 16) & 0xff) as f64];
    let shape = silhouette(concept, variant);
    let mut rgba = Vec::with_capacity(4 * SIZE * SIZE);
    for py in 0..SIZE {
        for px in 0..SIZE {
            let (x, y) = ((px as f64 + 0.5) / SIZE as f64, (py as f64 + 0.5) / SIZE as f64);
            let shade = 0.6 + 0.4 * (1.0 - y) + 0.08 * ((px / 4 + py / 4) % 2) as f64;
            for b in base {
                rgba.push((40.0 + b * 0.7 * shade).clamp(0.0, 255.0) as u8);
            }
            rgba.push(if shape(x, y) { 255 } else { 0 });
        }
    }
    ObjectCutout::new(SIZE, SIZE, rgba, concept).expect("silhouettes are non-empty")
}

impl CutoutBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Procedural bank with three variants per built-in concept.
    pub fn builtin() -> Self {
        let mut bank = Self::new();
        for c in BUILTIN_CONCEPTS {
            for v in 0..3 {
                bank.insert(procedural_cutout(c, v));
            }
        }
        bank
    }

    pub fn insert(&mut self, cutout: ObjectCutout) {
        self.entries.entry(cutout.category.clone()).or_default().push(cutout);
    }

    /// Loads `<dir>/<concept>/*.png`, one subdirectory per concept.
    pub fn load_dir(dir: &Path) -> Result<Self, CompositorError> {
        let io = |e: std::io::Error| CompositorError::Io(format!("{}: {e}", dir.display()));
        let mut bank = Self::new();
        let mut concepts: Vec<_> = std::fs::read_dir(dir).map_err(io)?.collect::<Result<_, _>>().map_err(io)?;
        concepts.sort_by_key(|e| e.file_name());
        for entry in concepts {
            if !entry.path().is_dir() {
                continue;
            }
            let concept = entry.file_name().to_string_lossy().replace('_', " ");
            let mut files: Vec<_> = std::fs::read_dir(entry.path())
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            files.sort();
            for f in files {
                bank.insert(ObjectCutout::load(&f, concept.clone())?);
            }
        }
        Ok(bank)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cutout for `concept` chosen by `seed`.
    pub fn pick(&self, concept: &str, seed: u64) -> Result<&ObjectCutout, CompositorError> {
        let list = self.entries.get(concept).filter(|l| !l.is_empty()).ok_or_else(|| CompositorError::UnknownConcept(concept.into()))?;
        Ok(&list[(keyed_hash64(seed, concept.as_bytes()) % list.len() as u64) as usize])
    }

    /// Like [`pick`](Self::pick) but draws an ad-hoc silhouette for
    /// concepts the bank does not hold.
    pub fn pick_or_draw(&self, concept: &str, seed: u64) -> ObjectCutout {
        match self.pick(concept, seed) {
            Ok(c) => c.clone(),
            Err(_) => procedural_cutout(concept, seed % 3),
        }
    }
}
