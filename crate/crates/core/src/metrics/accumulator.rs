//! Mergeable dual-histogram state for streaming AUROC / AP / FPR95.
//!
//! Scores are binned over a fixed declared range into `bins` buckets
//! (out-of-range values land in the edge buckets). Positive and negative
//! pixels are counted separately with 64-bit counters, so accumulators
//! built on disjoint data merge exactly by addition.

use serde::{Deserialize, Serialize};

use super::{MetricError, MetricTriple, ScoreMap};
use crate::compositor::{AnomalyMask, MASK_ANOMALY, MASK_IGNORE};

pub const DEFAULT_BINS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    bins: usize,
    lo: OrderedBound,
    hi: OrderedBound,
    pos_hist: Vec<u64>,
    neg_hist: Vec<u64>,
    pos_total: u64,
    neg_total: u64,
}

/// `f64` compared by bit pattern, so accumulators can be `Eq`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
struct OrderedBound(f64);

impl PartialEq for OrderedBound {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for OrderedBound {}

impl Default for MetricAccumulator {
    fn default() -> Self {
        Self::new(DEFAULT_BINS, (0.0, 1.0)).unwrap()
    }
}

impl MetricAccumulator {
    pub fn new(bins: usize, range: (f64, f64)) -> Result<Self, MetricError> {
        if bins == 0 {
            return Err(MetricError::Format("bin count must be positive".into()));
        }
        if !(range.0 < range.1 && range.0.is_finite() && range.1.is_finite()) {
            return Err(MetricError::InvalidRange(range.0, range.1));
        }
        Ok(Self {
            bins,
            lo: OrderedBound(range.0),
            hi: OrderedBound(range.1),
            pos_hist: vec![0; bins],
            neg_hist: vec![0; bins],
            pos_total: 0,
            neg_total: 0,
        })
    }

    /// Fresh accumulator with the same binning.
    pub fn empty_like(&self) -> Self {
        Self::new(self.bins, self.range()).unwrap()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo.0, self.hi.0)
    }

    pub fn pos_hist(&self) -> &[u64] {
        &self.pos_hist
    }

    pub fn neg_hist(&self) -> &[u64] {
        &self.neg_hist
    }

    pub fn pos_total(&self) -> u64 {
        self.pos_total
    }

    pub fn neg_total(&self) -> u64 {
        self.neg_total
    }

    pub fn is_compatible(&self, other: &Self) -> bool {
        self.bins == other.bins && self.lo == other.lo && self.hi == other.hi
    }

    #[inline]
    fn bin_of(&self, score: f64, scale: f64) -> usize {
        (((score - self.lo.0) * scale) as usize).min(self.bins - 1)
    }

    /// Adds a single scored pixel.
    pub fn push(&mut self, score: f64, positive: bool) {
        let scale = self.bins as f64 / (self.hi.0 - self.lo.0);
        let b = self.bin_of(score, scale);
        if positive {
            self.pos_hist[b] += 1;
            self.pos_total += 1;
        } else {
            self.neg_hist[b] += 1;
            self.neg_total += 1;
        }
    }

    /// Bins every non-ignore pixel; mask value 255 is positive, anything
    /// else except the ignore sentinel is negative.
    pub fn push_slice(&mut self, scores: &[f32], mask: &[u8]) -> Result<(), MetricError> {
        if scores.len() != mask.len() {
            return Err(MetricError::DimensionMismatch { scores: scores.len(), mask: mask.len() });
        }
        let scale = self.bins as f64 / (self.hi.0 - self.lo.0);
        let lo = self.lo.0;
        let last = self.bins - 1;
        let (mut pos, mut neg) = (0u64, 0u64);
        let (pos_hist, neg_hist) = (&mut self.pos_hist, &mut self.neg_hist);
        for (&s, &m) in scores.iter().zip(mask) {
            if m == MASK_IGNORE {
                continue;
            }
            let b = (((s as f64 - lo) * scale) as usize).min(last);
            if m == MASK_ANOMALY {
                pos_hist[b] += 1;
                pos += 1;
            } else {
                neg_hist[b] += 1;
                neg += 1;
            }
        }
        self.pos_total += pos;
        self.neg_total += neg;
        Ok(())
    }

    pub fn accumulate(&mut self, scores: &ScoreMap, mask: &AnomalyMask) -> Result<(), MetricError> {
        if (scores.width(), scores.height()) != (mask.width(), mask.height()) {
            return Err(MetricError::DimensionMismatch { scores: scores.scores().len(), mask: mask.values().len() });
        }
        let (dlo, dhi) = scores.declared_range();
        if dlo < self.lo.0 || dhi > self.hi.0 {
            return Err(MetricError::RangeNotCovered { acc: self.range(), scores: (dlo, dhi) });
        }
        self.push_slice(scores.scores(), mask.values())
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), MetricError> {
        if !self.is_compatible(other) {
            return Err(MetricError::Incompatible);
        }
        for (a, b) in self.pos_hist.iter_mut().zip(&other.pos_hist) {
            *a += b;
        }
        for (a, b) in self.neg_hist.iter_mut().zip(&other.neg_hist) {
            *a += b;
        }
        self.pos_total += other.pos_total;
        self.neg_total += other.neg_total;
        Ok(())
    }

    pub fn merged<'a>(mut iter: impl Iterator<Item = &'a MetricAccumulator>) -> Result<Option<MetricAccumulator>, MetricError> {
        let Some(first) = iter.next() else { return Ok(None) };
        let mut acc = first.clone();
        for a in iter {
            acc.merge(a)?;
        }
        Ok(Some(acc))
    }

    fn require_both(&self) -> Result<(), MetricError> {
        if self.pos_total == 0 || self.neg_total == 0 {
            return Err(MetricError::DegenerateClass { pos: self.pos_total, neg: self.neg_total });
        }
        Ok(())
    }

    /// Rank AUROC with ties inside a bin counted as half a concordant pair.
    pub fn auroc(&self) -> Result<f64, MetricError> {
        self.require_both()?;
        // Twice the Mann-Whitney statistic, kept integral.
        let mut twice_u: u128 = 0;
        let mut neg_below: u128 = 0;
        for (&p, &n) in self.pos_hist.iter().zip(&self.neg_hist) {
            twice_u += p as u128 * (2 * neg_below + n as u128);
            neg_below += n as u128;
        }
        let denom = 2 * self.pos_total as u128 * self.neg_total as u128;
        Ok(twice_u as f64 / denom as f64)
    }

    /// Step-wise area under the precision-recall curve, sweeping bins from
    /// the highest score down.
    pub fn average_precision(&self) -> Result<f64, MetricError> {
        if self.pos_total == 0 {
            return Err(MetricError::DegenerateClass { pos: self.pos_total, neg: self.neg_total });
        }
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut ap = 0.0;
        for b in (0..self.bins).rev() {
            let p = self.pos_hist[b];
            tp += p;
            fp += self.neg_hist[b];
            if p > 0 {
                ap += (tp as f64 / (tp + fp) as f64) * (p as f64 / self.pos_total as f64);
            }
        }
        Ok(ap.min(1.0))
    }

    /// False-positive rate at the highest bin whose cumulative TPR reaches
    /// 95%. The whole crossing bin is counted, so the value never
    /// understates the rate.
    pub fn fpr_at_95tpr(&self) -> Result<f64, MetricError> {
        self.require_both()?;
        let (mut tp, mut fp) = (0u64, 0u64);
        for b in (0..self.bins).rev() {
            tp += self.pos_hist[b];
            fp += self.neg_hist[b];
            if 20 * tp as u128 >= 19 * self.pos_total as u128 {
                return Ok(fp as f64 / self.neg_total as f64);
            }
        }
        unreachable!("cumulative TPR reaches 1 at the lowest bin")
    }

    pub fn metrics(&self) -> Result<MetricTriple, MetricError> {
        Ok(MetricTriple { auroc: self.auroc()?, ap: self.average_precision()?, fpr95: self.fpr_at_95tpr()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn acc_from(scores: &[f32], mask: &[u8], bins: usize) -> MetricAccumulator {
        let mut a = MetricAccumulator::new(bins, (0.0, 1.0)).unwrap();
        a.push_slice(scores, mask).unwrap();
        a
    }

    #[test]
    fn binning_example() {
        let a = acc_from(&[0.1, 0.4, 0.6, 0.9], &[0, 0, 255, 255], 2);
        assert_eq!(a.neg_hist(), &[2, 0]);
        assert_eq!(a.pos_hist(), &[0, 2]);
    }

    #[test]
    fn ignore_pixels_are_skipped() {
        let a = acc_from(&[0.1, 0.4, 0.6], &[128, 128, 128], 8);
        assert_eq!(a, MetricAccumulator::new(8, (0.0, 1.0)).unwrap());
    }

    #[test]
    fn perfect_and_tied_detectors() {
        let perfect = acc_from(&[0.0, 0.0, 1.0, 1.0], &[0, 0, 255, 255], DEFAULT_BINS);
        assert_eq!(perfect.metrics().unwrap(), MetricTriple { auroc: 1.0, ap: 1.0, fpr95: 0.0 });
        let tied = acc_from(&[0.3; 6], &[0, 0, 0, 255, 255, 0], DEFAULT_BINS);
        assert_eq!(tied.auroc().unwrap(), 0.5);
        assert_eq!(tied.fpr_at_95tpr().unwrap(), 1.0);
        let inverted = acc_from(&[1.0, 1.0, 0.0, 0.0], &[0, 0, 255, 255], DEFAULT_BINS);
        assert_eq!(inverted.fpr_at_95tpr().unwrap(), 1.0);
        assert_eq!(inverted.auroc().unwrap(), 0.0);
    }

    #[test]
    fn ap_without_negatives() {
        let a = acc_from(&[0.2, 0.7], &[255, 255], 16);
        assert_eq!(a.average_precision().unwrap(), 1.0);
        assert!(matches!(a.auroc(), Err(MetricError::DegenerateClass { .. })));
    }

    #[test]
    fn fpr95_example() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.55, 0.4];
        let mask = [255, 255, 255, 255, 255, 0, 0];
        let a = acc_from(&scores, &mask, DEFAULT_BINS);
        assert_eq!(a.fpr_at_95tpr().unwrap(), 0.5);
    }

    #[test]
    fn merge_requires_same_binning() {
        let mut a = MetricAccumulator::new(8, (0.0, 1.0)).unwrap();
        let b = MetricAccumulator::new(16, (0.0, 1.0)).unwrap();
        assert!(matches!(a.merge(&b), Err(MetricError::Incompatible)));
        let c = MetricAccumulator::new(8, (0.0, 2.0)).unwrap();
        assert!(matches!(a.merge(&c), Err(MetricError::Incompatible)));
    }

    fn pixels() -> impl Strategy<Value = (Vec<f32>, Vec<u8>)> {
        proptest::collection::vec((0.0f32..=1.0, prop_oneof![Just(0u8), Just(255u8), Just(128u8)]), 0..200)
            .prop_map(|v| v.into_iter().unzip())
    }

    proptest! {
        #[test]
        fn matches_per_pixel_reference((s, m) in pixels()) {
            let a = acc_from(&s, &m, 64);
            let mut pos = vec![0u64; 64];
            let mut neg = vec![0u64; 64];
            for (&si, &mi) in s.iter().zip(&m) {
                let b = ((si as f64 * 64.0).floor() as usize).min(63);
                match mi { 255 => pos[b] += 1, 0 => neg[b] += 1, _ => {} }
            }
            prop_assert_eq!(a.pos_hist(), &pos[..]);
            prop_assert_eq!(a.neg_hist(), &neg[..]);
            prop_assert_eq!(a.pos_total(), pos.iter().sum::<u64>());
            prop_assert_eq!(a.neg_total(), neg.iter().sum::<u64>());
        }

        #[test]
        fn merge_is_commutative_associative_and_pools((s1, m1) in pixels(), (s2, m2) in pixels(), (s3, m3) in pixels()) {
            let (a, b, c) = (acc_from(&s1, &m1, 32), acc_from(&s2, &m2, 32), acc_from(&s3, &m3, 32));
            let mut ab = a.clone(); ab.merge(&b).unwrap();
            let mut ba = b.clone(); ba.merge(&a).unwrap();
            prop_assert_eq!(&ab, &ba);
            let mut ab_c = ab.clone(); ab_c.merge(&c).unwrap();
            let mut bc = b.clone(); bc.merge(&c).unwrap();
            let mut a_bc = a.clone(); a_bc.merge(&bc).unwrap();
            prop_assert_eq!(&ab_c, &a_bc);
            let s: Vec<f32> = s1.iter().chain(&s2).chain(&s3).copied().collect();
            let m: Vec<u8> = m1.iter().chain(&m2).chain(&m3).copied().collect();
            prop_assert_eq!(&ab_c, &acc_from(&s, &m, 32));
        }
    }
}
