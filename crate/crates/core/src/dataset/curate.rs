use serde::{Deserialize, Serialize};

use super::{cell_index, DatasetError, ManifestEntry, Split};
use crate::hashing::keyed_hash64;
use crate::scene::{SceneKind, Weather};

const CELLS: usize = 36;

/// Requested test count per scene×weather cell, indexed by [`cell_index`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas(pub Vec<usize>);

impl Quotas {
    pub fn zero() -> Self {
        Quotas(vec![0; CELLS])
    }

    /// Spreads `total` evenly; the first `total % 36` cells in scene-major
    /// order take one extra.
    pub fn balanced(total: usize) -> Self {
        let (q, r) = (total / CELLS, total % CELLS);
        Quotas((0..CELLS).map(|i| q + (i < r) as usize).collect())
    }

    pub fn get(&self, scene: SceneKind, weather: Weather) -> usize {
        self.0[cell_index(scene, weather)]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurationFilters {
    pub min_fraction: f64,
    pub max_fraction: f64,
    pub require_refined: bool,
}

impl Default for CurationFilters {
    fn default() -> Self {
        Self { min_fraction: 0.0, max_fraction: 1.0, require_refined: false }
    }
}

impl CurationFilters {
    pub fn accepts(&self, e: &ManifestEntry) -> bool {
        e.pixel_fraction >= self.min_fraction && e.pixel_fraction <= self.max_fraction && (e.refined || !self.require_refined)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationConfig {
    pub target_total: usize,
    pub quotas: Quotas,
    pub filters: CurationFilters,
    pub seed: u64,
}

impl CurationConfig {
    pub fn balanced(target_total: usize, seed: u64) -> Self {
        Self { target_total, quotas: Quotas::balanced(target_total), filters: CurationFilters::default(), seed }
    }
}

/// A cell without enough eligible entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortCell {
    pub scene: SceneKind,
    pub weather: Weather,
    pub available: usize,
    pub requested: usize,
}

/// Order key of an entry within its cell.
pub fn selection_key(seed: u64, entry: &ManifestEntry) -> u64 {
    keyed_hash64(seed, entry.key().as_bytes())
}

/// Assigns `test` to a per-cell quota of eligible entries and `train` to
/// everything else.
///
/// Within each cell, eligible entries are ordered by a keyed hash of their
/// split-independent path and the first `quota` are taken. The result,
/// including entry order, depends only on the inputs.
pub fn curate(entries: &[ManifestEntry], cfg: &CurationConfig) -> Result<Vec<ManifestEntry>, DatasetError> {
    if cfg.quotas.0.len() != CELLS {
        return Err(DatasetError::Invalid(format!("expected {CELLS} quotas, got {}", cfg.quotas.0.len())));
    }
    if cfg.quotas.total() != cfg.target_total {
        return Err(DatasetError::QuotaSum { sum: cfg.quotas.total(), target: cfg.target_total });
    }
    let mut cells: Vec<Vec<(u64, &str, usize)>> = vec![Vec::new(); CELLS];
    for (i, e) in entries.iter().enumerate() {
        if cfg.filters.accepts(e) {
            cells[cell_index(e.scene, e.weather)].push((selection_key(cfg.seed, e), e.key(), i));
        }
    }
    let mut short = Vec::new();
    for s in SceneKind::ALL {
        for w in Weather::ALL {
            let (available, requested) = (cells[cell_index(s, w)].len(), cfg.quotas.get(s, w));
            if available < requested {
                short.push(ShortCell { scene: s, weather: w, available, requested });
            }
        }
    }
    if !short.is_empty() {
        return Err(DatasetError::InfeasibleQuota(short));
    }
    let mut out: Vec<ManifestEntry> = entries.iter().map(|e| ManifestEntry { split: Split::Train, ..e.clone() }).collect();
    for (c, cell) in cells.iter_mut().enumerate() {
        cell.sort_unstable();
        for &(_, _, i) in cell.iter().take(cfg.quotas.0[c]) {
            out[i].split = Split::Test;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TimeOfDay;

    fn synthetic(n: usize) -> Vec<ManifestEntry> {
        (0..n)
            .map(|i| {
                let (s, w) = (SceneKind::ALL[i % 6], Weather::ALL[(i / 6) % 6]);
                ManifestEntry {
                    image_path: format!("unassigned/{}/{}/{i:06}.png", s.ident(), w.ident()),
                    mask_path: format!("unassigned/{}/{}/{i:06}_mask.png", s.ident(), w.ident()),
                    scene: s,
                    weather: w,
                    time_of_day: TimeOfDay::Daytime,
                    categories: vec![],
                    pixel_fraction: (i % 50) as f64 / 1000.0,
                    split: Split::Unassigned,
                    refined: (i / 36) % 3 != 0,
                }
            })
            .collect()
    }

    fn test_counts(es: &[ManifestEntry]) -> Vec<usize> {
        let mut c = vec![0; CELLS];
        for e in es.iter().filter(|e| e.split == Split::Test) {
            c[cell_index(e.scene, e.weather)] += 1;
        }
        c
    }

    #[test]
    fn balanced_quota_shape() {
        let q = Quotas::balanced(1200);
        assert_eq!(q.total(), 1200);
        assert!(q.0.iter().all(|&v| v == 33 || v == 34));
    }

    #[test]
    fn zero_quotas_make_everything_train() {
        let es = synthetic(100);
        let cfg = CurationConfig { target_total: 0, quotas: Quotas::zero(), filters: CurationFilters::default(), seed: 1 };
        assert!(curate(&es, &cfg).unwrap().iter().all(|e| e.split == Split::Train));
    }

    #[test]
    fn exact_quotas_and_determinism() {
        let es = synthetic(2000);
        let cfg = CurationConfig::balanced(360, 5);
        let a = curate(&es, &cfg).unwrap();
        assert_eq!(test_counts(&a), vec![10; CELLS]);
        assert_eq!(a, curate(&es, &cfg).unwrap());
        let b = curate(&es, &CurationConfig::balanced(360, 6)).unwrap();
        assert_eq!(test_counts(&b), test_counts(&a));
        assert_ne!(a, b);
    }

    #[test]
    fn filters_and_shortfall() {
        let es = synthetic(360);
        let mut cfg = CurationConfig::balanced(360, 0);
        cfg.filters.require_refined = true;
        let Err(DatasetError::InfeasibleQuota(short)) = curate(&es, &cfg) else { panic!("expected shortfall") };
        assert_eq!(short.len(), 36);
        assert!(short.iter().all(|s| s.requested == 10 && s.available < 10));
        cfg.quotas = Quotas::balanced(36);
        cfg.target_total = 36;
        let out = curate(&es, &cfg).unwrap();
        assert!(out.iter().filter(|e| e.split == Split::Test).all(|e| e.refined));
    }

    #[test]
    fn quota_sum_checked() {
        let cfg = CurationConfig { target_total: 5, quotas: Quotas::zero(), filters: CurationFilters::default(), seed: 0 };
        assert!(matches!(curate(&[], &cfg), Err(DatasetError::QuotaSum { sum: 0, target: 5 })));
    }
}
