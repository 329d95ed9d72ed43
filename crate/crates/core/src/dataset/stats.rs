use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetError, ManifestEntry};
use crate::compositor::{AnomalyMask, MASK_ANOMALY};
use crate::imageio;
use crate::scene::{SceneKind, Weather};

pub const HEATMAP_W: usize = 64;
pub const HEATMAP_H: usize = 32;
/// Upscaling factor of the rendered heatmap image.
pub const HEATMAP_SCALE: usize = 8;
pub const HIST_BINS: usize = 50;
pub const HIST_MAX: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub images: usize,
    pub mean_pixel_fraction: Option<f64>,
    /// Counts of `pixel_fraction` over `[0, 0.25]`; larger values land in
    /// the last bin.
    pub fraction_histogram: Vec<u64>,
    /// Row-major `HEATMAP_H × HEATMAP_W` anomaly density, summing to one
    /// when any anomaly pixel exists.
    pub heatmap: Vec<f64>,
    /// `cell_counts[scene][weather]`.
    pub cell_counts: Vec<Vec<u64>>,
    pub category_counts: BTreeMap<String, u64>,
    pub split_counts: BTreeMap<String, u64>,
}

/// Bin of a pixel fraction in the histogram.
pub fn fraction_bin(f: f64) -> usize {
    ((f / HIST_MAX * HIST_BINS as f64).floor().max(0.0) as usize).min(HIST_BINS - 1)
}

/// Per-cell anomaly pixel density of one mask on the heatmap grid.
fn image_heatmap(mask: &AnomalyMask) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let mut hits = vec![0u64; HEATMAP_W * HEATMAP_H];
    let mut area = vec![0u64; HEATMAP_W * HEATMAP_H];
    let col: Vec<usize> = (0..w).map(|x| x * HEATMAP_W / w).collect();
    for (y, row) in mask.values().chunks_exact(w).enumerate() {
        let base = (y * HEATMAP_H / h) * HEATMAP_W;
        for (x, &v) in row.iter().enumerate() {
            let c = base + col[x];
            area[c] += 1;
            hits[c] += (v == MASK_ANOMALY) as u64;
        }
    }
    hits.iter().zip(&area).map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 }).collect()
}

/// Aggregates manifest statistics and the spatial anomaly heatmap.
///
/// Per-image heatmaps are summed in path order, so the result does not
/// depend on the order of `entries`.
pub fn compute_stats(entries: &[ManifestEntry], root: &Path) -> Result<DatasetStats, DatasetError> {
    let mut order: Vec<&ManifestEntry> = entries.iter().collect();
    order.sort_by(|a, b| a.image_path.cmp(&b.image_path).then(a.mask_path.cmp(&b.mask_path)));
    let maps: Vec<Vec<f64>> = order
        .par_iter()
        .map(|e| {
            let path = e.mask_abs(root);
            AnomalyMask::load(&path).map(|m| image_heatmap(&m)).map_err(|err| DatasetError::io(path, err))
        })
        .collect::<Result<_, _>>()?;
    let mut heatmap = vec![0.0; HEATMAP_W * HEATMAP_H];
    for m in &maps {
        for (acc, v) in heatmap.iter_mut().zip(m) {
            *acc += v;
        }
    }
    let total: f64 = heatmap.iter().sum();
    if total > 0.0 {
        heatmap.iter_mut().for_each(|v| *v /= total);
    }

    let mut fraction_histogram = vec![0u64; HIST_BINS];
    let mut cell_counts = vec![vec![0u64; Weather::ALL.len()]; SceneKind::ALL.len()];
    let mut category_counts = BTreeMap::new();
    let mut split_counts = BTreeMap::new();
    let mut fsum = 0.0;
    for e in &order {
        fraction_histogram[fraction_bin(e.pixel_fraction)] += 1;
        cell_counts[e.scene.index()][e.weather.index()] += 1;
        for c in &e.categories {
            *category_counts.entry(c.clone()).or_insert(0) += 1;
        }
        *split_counts.entry(e.split.ident().to_string()).or_insert(0) += 1;
        fsum += e.pixel_fraction;
    }
    Ok(DatasetStats {
        images: entries.len(),
        mean_pixel_fraction: (!entries.is_empty()).then(|| fsum / entries.len() as f64),
        fraction_histogram,
        heatmap,
        cell_counts,
        category_counts,
        split_counts,
    })
}

impl DatasetStats {
    pub fn heatmap_at(&self, col: usize, row: usize) -> f64 {
        self.heatmap[row * HEATMAP_W + col]
    }

    /// Share of heatmap mass in the lower half of the frame.
    pub fn lower_half_mass(&self) -> f64 {
        self.heatmap[HEATMAP_W * HEATMAP_H / 2..].iter().sum()
    }

    /// Grayscale rendering scaled so the densest cell is white.
    pub fn heatmap_image(&self) -> (usize, usize, Vec<u8>) {
        let (w, h) = (HEATMAP_W * HEATMAP_SCALE, HEATMAP_H * HEATMAP_SCALE);
        let max = self.heatmap.iter().cloned().fold(0.0, f64::max);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let v = self.heatmap_at(x / HEATMAP_SCALE, y / HEATMAP_SCALE);
                px.push(if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 });
            }
        }
        (w, h, px)
    }

    pub fn write_heatmap(&self, path: &Path) -> Result<(), DatasetError> {
        let (w, h, px) = self.heatmap_image();
        imageio::write_gray8(path, w, h, &px).map_err(|e| DatasetError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::scene::TimeOfDay;

    fn write_mask(root: &Path, rel: &str, w: usize, h: usize, on: &[(usize, usize)]) -> ManifestEntry {
        let mut v = vec![0u8; w * h];
        for &(x, y) in on {
            v[y * w + x] = 255;
        }
        AnomalyMask::new(w, h, v).unwrap().save(&root.join(rel)).unwrap();
        ManifestEntry {
            image_path: rel.replace("_mask", ""),
            mask_path: rel.into(),
            scene: SceneKind::Highway,
            weather: Weather::Snow,
            time_of_day: TimeOfDay::Daytime,
            categories: vec!["rock".into()],
            pixel_fraction: on.len() as f64 / (w * h) as f64,
            split: Split::Unassigned,
            refined: false,
        }
    }

    #[test]
    fn single_center_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_mask(dir.path(), "a_mask.png", 128, 64, &[(64, 32)]);
        let s = compute_stats(&[e], dir.path()).unwrap();
        assert_eq!(s.heatmap_at(32, 16), 1.0);
        assert_eq!(s.heatmap.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn duplicates_scale_counts_only() {
        let dir = tempfile::tempdir().unwrap();
        let e = write_mask(dir.path(), "a_mask.png", 100, 50, &[(3, 4), (90, 40), (91, 40)]);
        let one = compute_stats(&[e.clone()], dir.path()).unwrap();
        let two = compute_stats(&[e.clone(), e], dir.path()).unwrap();
        assert_eq!(two.heatmap, one.heatmap);
        assert_eq!(two.cell_counts[SceneKind::Highway.index()][Weather::Snow.index()], 2);
        assert_eq!(two.category_counts["rock"], 2);
        assert_eq!(two.fraction_histogram.iter().sum::<u64>(), 2);
    }

    #[test]
    fn order_invariant_and_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let es: Vec<_> = (0..5)
            .map(|i| write_mask(dir.path(), &format!("m{i}_mask.png"), 70 + i, 33 + 2 * i, &[(i, i), (60, 30), (i * 7, 20)]))
            .collect();
        let a = compute_stats(&es, dir.path()).unwrap();
        let mut rev = es.clone();
        rev.reverse();
        assert_eq!(compute_stats(&rev, dir.path()).unwrap(), a);
        assert!((a.heatmap.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_manifest_is_valid() {
        let s = compute_stats(&[], Path::new(".")).unwrap();
        assert_eq!(s.images, 0);
        assert!(s.heatmap.iter().all(|&v| v == 0.0));
        assert!(serde_json::to_string(&s).is_ok());
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(fraction_bin(0.0), 0);
        assert_eq!(fraction_bin(0.0237), 4);
        assert_eq!(fraction_bin(0.25), 49);
        assert_eq!(fraction_bin(0.9), 49);
    }
}
