//! Perspective-consistent pseudo-box sampling inside a drivable region.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::PseudoBox;
use super::PlacerError;
use crate::hashing::sha256_hex;
use crate::scene::RegionMask;

/// Rejection-sampling budget for each box.
pub const MAX_ATTEMPTS_PER_BOX: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Boxes per image.
    pub n: usize,
    /// Depth-scale coefficient in pixels.
    pub s_h: f64,
    /// Width-over-height range.
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub h_min: f64,
    /// `None` means half the image height.
    pub h_max: Option<f64>,
    /// Bottom-center pixel must lie in the region.
    pub require_ground_contact: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n: 64, s_h: 24.0, aspect_min: 0.5, aspect_max: 1.5, h_min: 12.0, h_max: None, require_ground_contact: true }
    }
}

impl SamplerConfig {
    pub fn h_max_for(&self, image_h: usize) -> f64 {
        self.h_max.unwrap_or(image_h as f64 / 2.0)
    }

    /// The same config with `h_max` made explicit for an image height.
    pub fn resolved(&self, image_h: usize) -> SamplerConfig {
        SamplerConfig { h_max: Some(self.h_max_for(image_h)), ..self.clone() }
    }

    pub fn validate(&self, image_h: usize) -> Result<(), PlacerError> {
        let bad = |m: String| Err(PlacerError::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.s_h.is_finite() && self.s_h > 0.0) {
            return bad(format!("s_h must be positive, got {}", self.s_h));
        }
        if !(self.aspect_min > 0.0 && self.aspect_min <= self.aspect_max && self.aspect_max.is_finite()) {
            return bad(format!("aspect range {}:{} must satisfy 0 < min <= max", self.aspect_min, self.aspect_max));
        }
        let h_max = self.h_max_for(image_h);
        if !(self.h_min > 0.0 && self.h_min <= h_max && h_max.is_finite()) {
            return bad(format!("height range {}:{} must satisfy 0 < min <= max", self.h_min, h_max));
        }
        Ok(())
    }

    /// Canonical one-line description; the hash is taken over this text.
    pub fn describe(&self, image_h: usize) -> String {
        format!(
            "n={} s_h={} aspect={}:{} h={}:{} ground_contact={}",
            self.n,
            self.s_h,
            self.aspect_min,
            self.aspect_max,
            self.h_min,
            self.h_max_for(image_h),
            self.require_ground_contact
        )
    }

    pub fn hash(&self, image_h: usize) -> String {
        sha256_hex(self.describe(image_h).as_bytes())[..16].to_string()
    }
}

/// Box height for a ground-contact row: `clamp(s_h / ŷ, h_min, h_max)` with
/// `ŷ = max(1/H, (H - row)/H)` the normalized distance from the bottom.
pub fn perspective_height(anchor_row: usize, image_h: usize, cfg: &SamplerConfig) -> f64 {
    let hf = image_h as f64;
    let y_hat = ((hf - anchor_row as f64) / hf).max(1.0 / hf);
    (cfg.s_h / y_hat).clamp(cfg.h_min, cfg.h_max_for(image_h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub boxes: Vec<PseudoBox<f64>>,
    pub image_w: usize,
    pub image_h: usize,
    pub seed: u64,
    pub config: SamplerConfig,
}

/// How a sampler picks the box height once the anchor pixel is known.
#[derive(Clone, Copy)]
enum HeightRule {
    Perspective,
    Uniform,
}

fn box_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_with(region: &RegionMask, cfg: &SamplerConfig, seed: u64, rule: HeightRule) -> Result<BoxSet, PlacerError> {
    let (w_img, h_img) = (region.width(), region.height());
    cfg.validate(h_img)?;
    let anchors = if cfg.require_ground_contact { region.indices() } else { (0..w_img * h_img).collect() };
    if anchors.is_empty() {
        return Err(PlacerError::EmptyRegion);
    }
    let h_max = cfg.h_max_for(h_img);
    let mut boxes = Vec::with_capacity(cfg.n);
    for index in 0..cfg.n {
        let mut rng = box_rng(seed, index);
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS_PER_BOX {
            let a = anchors[rng.random_range(0..anchors.len())];
            let (ax, ay) = ((a % w_img) as i64, (a / w_img) as i64);
            let h = match rule {
                HeightRule::Perspective => perspective_height(ay as usize, h_img, cfg),
                HeightRule::Uniform => rng.random_range(cfg.h_min..=h_max),
            }
            .round()
            .max(1.0);
            let rho = rng.random_range(cfg.aspect_min..=cfg.aspect_max);
            let w = (rho * h).round().clamp(1.0, w_img as f64);
            let y0 = ay + 1 - h as i64;
            if y0 < 0 {
                continue;
            }
            let x0 = (ax - (w as i64) / 2).clamp(0, w_img as i64 - w as i64);
            let b = PseudoBox::from_corner(x0 as f64, y0 as f64, w, h);
            if cfg.require_ground_contact {
                let (bx, by) = b.bottom_center_pixel();
                if !region.contains(bx as usize, by as usize) {
                    continue;
                }
            }
            placed = Some(b);
            break;
        }
        boxes.push(placed.ok_or(PlacerError::InfeasibleConfig { index, attempts: MAX_ATTEMPTS_PER_BOX })?);
    }
    Ok(BoxSet { boxes, image_w: w_img, image_h: h_img, seed, config: cfg.resolved(h_img) })
}

/// Samples `cfg.n` boxes whose height follows the perspective prior at
/// their ground-contact row. Box `i` draws from its own ChaCha stream
/// keyed by `(seed, i)`, so the output depends only on the inputs.
pub fn sample_pseudo_boxes(region: &RegionMask, cfg: &SamplerConfig, seed: u64) -> Result<BoxSet, PlacerError> {
    sample_with(region, cfg, seed, HeightRule::Perspective)
}

/// Baseline without the prior: heights uniform in `[h_min, h_max]`.
pub fn sample_uniform_boxes(region: &RegionMask, cfg: &SamplerConfig, seed: u64) -> Result<BoxSet, PlacerError> {
    sample_with(region, cfg, seed, HeightRule::Uniform)
}

impl BoxSet {
    /// Header line followed by one `cx cy w h` record per box.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "boxset width={} height={} seed={} config={} {}\n",
            self.image_w,
            self.image_h,
            self.seed,
            self.config.hash(self.image_h),
            self.config.describe(self.image_h)
        );
        for b in &self.boxes {
            let _ = writeln!(out, "{} {} {} {}", b.cx, b.cy, b.w, b.h);
        }
        out
    }

    pub fn parse(text: &str) -> Result<BoxSet, PlacerError> {
        let bad = |line: usize, m: &str| PlacerError::Format { line, reason: m.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("boxset") {
            return Err(bad(1, "header must start with `boxset`"));
        }
        let mut kv = std::collections::BTreeMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| bad(1, "expected key=value"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(1, &format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64, PlacerError> { get(k)?.parse().map_err(|_| bad(1, &format!("bad `{k}`"))) };
        let range = |k: &str| -> Result<(f64, f64), PlacerError> {
            let (a, b) = get(k)?.split_once(':').ok_or_else(|| bad(1, &format!("bad `{k}`")))?;
            Ok((a.parse().map_err(|_| bad(1, k))?, b.parse().map_err(|_| bad(1, k))?))
        };
        let image_w: usize = get("width")?.parse().map_err(|_| bad(1, "bad width"))?;
        let image_h: usize = get("height")?.parse().map_err(|_| bad(1, "bad height"))?;
        let seed: u64 = get("seed")?.parse().map_err(|_| bad(1, "bad seed"))?;
        let (aspect_min, aspect_max) = range("aspect")?;
        let (h_min, h_max) = range("h")?;
        let config = SamplerConfig {
            n: get("n")?.parse().map_err(|_| bad(1, "bad n"))?,
            s_h: num("s_h")?,
            aspect_min,
            aspect_max,
            h_min,
            h_max: Some(h_max),
            require_ground_contact: get("ground_contact")?.parse().map_err(|_| bad(1, "bad ground_contact"))?,
        };
        if config.hash(image_h) != get("config")? {
            return Err(bad(1, "config hash does not match the header fields"));
        }
        let mut boxes = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let v: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            let v = v.map_err(|_| bad(i + 1, "non-numeric box record"))?;
            if v.len() != 4 {
                return Err(bad(i + 1, "box record needs 4 fields"));
            }
            let b = PseudoBox::new(v[0], v[1], v[2], v[3]);
            if !b.is_valid_in(image_w, image_h) {
                return Err(bad(i + 1, "box outside image bounds"));
            }
            boxes.push(b);
        }
        Ok(BoxSet { boxes, image_w, image_h, seed, config })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p)?;
        }
        std::fs::write(path, self.to_text())
    }

    pub fn load(path: &Path) -> Result<BoxSet, PlacerError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlacerError::Io(format!("{}: {e}", path.display())))?;
        BoxSet::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson;

    fn full(w: usize, h: usize) -> RegionMask {
        RegionMask::from_fn(w, h, |_, _| true).unwrap()
    }

    fn bottom_half(w: usize, h: usize) -> RegionMask {
        RegionMask::from_fn(w, h, |_, y| y >= h / 2).unwrap()
    }

    #[test]
    fn perspective_examples() {
        let cfg = SamplerConfig::default();
        assert_eq!(perspective_height(384, 512, &cfg), 96.0);
        let small = SamplerConfig { s_h: 10.0, ..cfg.clone() };
        assert_eq!(perspective_height(0, 512, &small), small.h_min);
        assert_eq!(perspective_height(511, 512, &cfg), 256.0);
    }

    #[test]
    fn perspective_is_monotone_for_every_row() {
        for (h, s_h) in [(64usize, 3.0), (512, 24.0), (1024, 50.0), (333, 0.5)] {
            let cfg = SamplerConfig { s_h, ..Default::default() };
            let hs: Vec<f64> = (0..h).map(|r| perspective_height(r, h, &cfg)).collect();
            assert!(hs.windows(2).all(|w| w[0] <= w[1]), "h={h}");
        }
    }

    #[test]
    fn full_region_sample_respects_contract() {
        let region = full(512, 512);
        let set = sample_pseudo_boxes(&region, &SamplerConfig::default(), 3).unwrap();
        assert_eq!(set.boxes.len(), 64);
        for b in &set.boxes {
            assert!(b.is_valid_in(512, 512));
            let (x, y) = b.bottom_center_pixel();
            assert!(region.contains(x as usize, y as usize));
            let expect = perspective_height(b.anchor_row() as usize, 512, &set.config).round();
            assert_eq!(b.h, expect);
            let rho = b.w / b.h;
            assert!(rho >= 0.5 - 0.5 / b.h && rho <= 1.5 + 0.5 / b.h);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let region = bottom_half(300, 200);
        let cfg = SamplerConfig::default();
        let a = sample_pseudo_boxes(&region, &cfg, 11).unwrap();
        let b = sample_pseudo_boxes(&region, &cfg, 11).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = sample_pseudo_boxes(&region, &cfg, 12).unwrap();
        assert_ne!(a.boxes, c.boxes);
    }

    #[test]
    fn depth_size_correlation_on_bottom_half() {
        let region = bottom_half(512, 512);
        let set = sample_pseudo_boxes(&region, &SamplerConfig::default(), 7).unwrap();
        let rows: Vec<f64> = set.boxes.iter().map(|b| b.anchor_row() as f64).collect();
        let hs: Vec<f64> = set.boxes.iter().map(|b| b.h).collect();
        assert!(pearson(&rows, &hs).unwrap() >= 0.9);
    }

    #[test]
    fn infeasible_and_invalid_configs() {
        // A single top row cannot host a box taller than one pixel.
        let region = RegionMask::from_fn(64, 64, |_, y| y == 0).unwrap();
        let err = sample_pseudo_boxes(&region, &SamplerConfig::default(), 1).unwrap_err();
        assert!(matches!(err, PlacerError::InfeasibleConfig { index: 0, .. }));
        let inverted = SamplerConfig { aspect_min: 2.0, aspect_max: 1.0, ..Default::default() };
        assert!(matches!(sample_pseudo_boxes(&full(8, 8), &inverted, 1), Err(PlacerError::InvalidConfig(_))));
    }

    #[test]
    fn text_round_trip() {
        let set = sample_pseudo_boxes(&bottom_half(640, 360), &SamplerConfig::default(), 5).unwrap();
        let back = BoxSet::parse(&set.to_text()).unwrap();
        assert_eq!(back, set);
        let tampered = set.to_text().replacen("s_h=24", "s_h=25", 1);
        assert!(BoxSet::parse(&tampered).is_err());
    }
}
