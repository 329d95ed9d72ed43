//! Per-pixel anomaly score maps and their two on-disk encodings.
//!
//! Raw `CSM1` layout (little-endian): 4-byte magic, `u32` width, `u32`
//! height, `u32` reserved (zero), then `width * height` `f32` scores in
//! row-major order. Alternatively a 16-bit grayscale PNG whose value divided
//! by 65535 is the score.

use std::io::{Read, Write};
use std::path::Path;

use super::MetricError;

pub const CSM_MAGIC: &[u8; 4] = b"CSM1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    scores: Vec<f32>,
    range: (f64, f64),
}

impl ScoreMap {
    /// Validates finiteness and clamps into `range`.
    pub fn new(width: usize, height: usize, mut scores: Vec<f32>, range: (f64, f64)) -> Result<Self, MetricError> {
        if scores.len() != width * height {
            return Err(MetricError::Format(format!("{} scores for a {width}x{height} map", scores.len())));
        }
        if !(range.0 < range.1 && range.0.is_finite() && range.1.is_finite()) {
            return Err(MetricError::InvalidRange(range.0, range.1));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(MetricError::NonFinite(i));
        }
        let (lo, hi) = (range.0 as f32, range.1 as f32);
        for s in &mut scores {
            *s = s.clamp(lo, hi);
        }
        Ok(Self { width, height, scores, range })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn declared_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn to_csm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.scores.len());
        out.extend_from_slice(CSM_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for s in &self.scores {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_csm_bytes(bytes: &[u8], range: (f64, f64)) -> Result<Self, MetricError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != CSM_MAGIC {
            return Err(MetricError::Format("missing CSM1 header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (w, h) = (word(4), word(8));
        let expected = HEADER_LEN + 4 * w * h;
        if bytes.len() != expected {
            return Err(MetricError::Format(format!("{} bytes, expected {expected} for {w}x{h}", bytes.len())));
        }
        let scores = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(w, h, scores, range)
    }

    pub fn write_csm(&self, path: &Path) -> std::io::Result<()> {
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p)?;
        }
        std::fs::File::create(path)?.write_all(&self.to_csm_bytes())
    }

    /// Writes a 16-bit PNG; scores are mapped from the declared range.
    pub fn write_png16(&self, path: &Path) -> Result<(), MetricError> {
        let (lo, hi) = self.range;
        let data: Vec<u16> =
            self.scores.iter().map(|&s| (((s as f64 - lo) / (hi - lo)) * 65535.0).round().clamp(0.0, 65535.0) as u16).collect();
        crate::imageio::write_gray16(path, self.width, self.height, &data).map_err(|e| MetricError::Io(e.to_string()))
    }

    /// Loads either encoding, chosen by the file's leading bytes.
    pub fn load(path: &Path, range: (f64, f64)) -> Result<Self, MetricError> {
        let io = |e: &dyn std::fmt::Display| MetricError::Io(format!("{}: {e}", path.display()));
        let mut bytes = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| io(&e))?;
        if bytes.starts_with(CSM_MAGIC) {
            return Self::from_csm_bytes(&bytes, range);
        }
        let img = crate::imageio::decode_png(&bytes).map_err(|e| io(&e))?;
        let image::DynamicImage::ImageLuma16(gray) = img else {
            return Err(MetricError::Format(format!("{}: score PNG must be 16-bit grayscale", path.display())));
        };
        let (w, h) = gray.dimensions();
        let (lo, hi) = range;
        let scores = gray.into_raw().into_iter().map(|v| (lo + (v as f64 / 65535.0) * (hi - lo)) as f32).collect();
        Self::new(w as usize, h as usize, scores, range)
    }
}
