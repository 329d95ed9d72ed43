//! Sort-based metrics with exact tie handling; reference for the histogram
//! engine.

use super::{MetricError, MetricTriple};
use crate::scalar::Real;

/// Upper bound on the input size accepted by [`exact_metrics`].
pub const EXACT_MAX_LEN: usize = 1_000_000;

/// Positive/negative counts for each distinct score, highest score first.
fn tie_groups<T: Real>(scores: &[T], labels: &[bool]) -> Result<Vec<(u64, u64)>, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::DimensionMismatch { scores: scores.len(), mask: labels.len() });
    }
    if scores.len() > EXACT_MAX_LEN {
        return Err(MetricError::TooLarge(scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut prev: Option<T> = None;
    for i in order {
        if prev != Some(scores[i]) {
            groups.push((0, 0));
            prev = Some(scores[i]);
        }
        let g = groups.last_mut().unwrap();
        if labels[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    Ok(groups)
}

/// Exact `(AUROC, AP, FPR95)` for `labels[i] == true` meaning anomaly.
///
/// AUROC is the Mann-Whitney statistic with ties counted as one half; AP
/// and FPR95 are evaluated at every distinct score threshold, FPR95 at the
/// highest threshold whose TPR reaches 95%.
pub fn exact_metrics<T: Real>(scores: &[T], labels: &[bool]) -> Result<MetricTriple, MetricError> {
    let groups = tie_groups(scores, labels)?;
    let pos: u64 = groups.iter().map(|g| g.0).sum();
    let neg: u64 = groups.iter().map(|g| g.1).sum();
    if pos == 0 || neg == 0 {
        return Err(MetricError::DegenerateClass { pos, neg });
    }

    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    for &(p, n) in groups.iter().rev() {
        twice_u += p as u128 * (2 * neg_below + n as u128);
        neg_below += n as u128;
    }
    let auroc = twice_u as f64 / (2 * pos as u128 * neg as u128) as f64;

    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    let mut fpr95 = None;
    for &(p, n) in &groups {
        tp += p;
        fp += n;
        if p > 0 {
            ap += (tp as f64 / (tp + fp) as f64) * (p as f64 / pos as f64);
        }
        if fpr95.is_none() && 20 * tp as u128 >= 19 * pos as u128 {
            fpr95 = Some(fp as f64 / neg as f64);
        }
    }
    Ok(MetricTriple { auroc, ap: ap.min(1.0), fpr95: fpr95.expect("TPR reaches 1 at the last threshold") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_point_ap() {
        let m = exact_metrics(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap();
        assert_eq!(m.ap, 1.0);
        assert_eq!(m.auroc, 1.0);
    }

    #[test]
    fn fpr95_example() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.55, 0.4];
        let labels = [true, true, true, true, true, false, false];
        assert_eq!(exact_metrics(&scores, &labels).unwrap().fpr95, 0.5);
    }

    #[test]
    fn single_pair() {
        let m = exact_metrics(&[0.7f32, 0.2], &[true, false]).unwrap();
        assert_eq!(m, MetricTriple { auroc: 1.0, ap: 1.0, fpr95: 0.0 });
    }

    #[test]
    fn label_swap_reflects_auroc() {
        let scores = [0.1, 0.4, 0.4, 0.8, 0.3, 0.9, 0.4];
        let labels = [false, true, false, true, false, true, true];
        let a = exact_metrics(&scores, &labels).unwrap().auroc;
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let b = exact_metrics(&scores, &flipped).unwrap().auroc;
        assert_relative_eq!(a, 1.0 - b, epsilon = 1e-15);
    }

    #[test]
    fn perfect_and_constant() {
        let labels = [false, true, false, true];
        let perfect: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        assert_eq!(exact_metrics(&perfect, &labels).unwrap(), MetricTriple { auroc: 1.0, ap: 1.0, fpr95: 0.0 });
        let constant = exact_metrics(&[0.5; 4], &labels).unwrap();
        assert_eq!(constant.auroc, 0.5);
        assert_eq!(constant.fpr95, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(exact_metrics(&[0.1, 0.2], &[true, true]), Err(MetricError::DegenerateClass { pos: 2, neg: 0 })));
        assert!(matches!(exact_metrics(&[0.1], &[true, false]), Err(MetricError::DimensionMismatch { .. })));
        assert!(matches!(exact_metrics(&[f64::NAN, 0.0], &[true, false]), Err(MetricError::NonFinite(0))));
    }
}
