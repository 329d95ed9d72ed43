use super::geometry::{iou, match_cost, PseudoBox};
use super::hungarian::{hungarian_match, Assignment};
use super::PlacerError;
use crate::scalar::Real;

/// Per-pair loss terms for one matched prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms<T> {
    pub pred: usize,
    pub pseudo: usize,
    /// L1 distance between normalized centers.
    pub l1: T,
    /// `1 - IoU`.
    pub overlap: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLoss<T> {
    pub total: T,
    pub assignment: Assignment<T>,
    pub terms: Vec<PairTerms<T>>,
}

/// Localization loss under the minimum-cost matching of predictions to
/// pseudo boxes. The matching cost is the loss summand itself.
///
/// `total` sums the per-pair terms in ascending order, so it does not
/// depend on how either input is ordered.
pub fn box_loss<T: Real>(
    pred: &[PseudoBox<T>],
    pseudo: &[PseudoBox<T>],
    image_w: usize,
    image_h: usize,
) -> Result<BoxLoss<T>, PlacerError> {
    if pred.is_empty() || pseudo.is_empty() {
        return Err(PlacerError::EmptySet);
    }
    let (iw, ih) = (T::of(image_w as f64), T::of(image_h as f64));
    let costs: Vec<Vec<T>> = pred.iter().map(|p| pseudo.iter().map(|q| match_cost(p, q, iw, ih)).collect()).collect();
    let assignment = hungarian_match(&costs)?;
    let terms: Vec<PairTerms<T>> = assignment
        .pairs()
        .map(|(i, j)| {
            let (px, py) = pred[i].normalized_center(iw, ih);
            let (qx, qy) = pseudo[j].normalized_center(iw, ih);
            PairTerms { pred: i, pseudo: j, l1: (px - qx).abs() + (py - qy).abs(), overlap: T::one() - iou(&pred[i], &pseudo[j]) }
        })
        .collect();
    let mut summands: Vec<T> = terms.iter().map(|t| t.l1 + t.overlap).collect();
    summands.sort_by(|a, b| a.partial_cmp(b).expect("finite terms"));
    let total = summands.into_iter().fold(T::zero(), |acc, v| acc + v);
    Ok(BoxLoss { total, assignment, terms })
}

/// [`box_loss`] over two box sets that share an image frame.
pub fn box_set_loss(pred: &super::BoxSet, pseudo: &super::BoxSet) -> Result<BoxLoss<f64>, PlacerError> {
    if (pred.image_w, pred.image_h) != (pseudo.image_w, pseudo.image_h) {
        return Err(PlacerError::DimensionMismatch {
            left: (pred.image_w, pred.image_h),
            right: (pseudo.image_w, pseudo.image_h),
        });
    }
    box_loss(&pred.boxes, &pseudo.boxes, pred.image_w, pred.image_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placer::hungarian::brute::min_assignment_cost;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn boxes() -> Vec<PseudoBox<f64>> {
        vec![
            PseudoBox::new(10.0, 10.0, 10.0, 10.0),
            PseudoBox::new(30.0, 20.0, 8.0, 12.0),
            PseudoBox::new(42.0, 40.0, 6.0, 6.0),
        ]
    }

    #[test]
    fn identical_sets_have_zero_loss() {
        let b = boxes();
        let l = box_loss(&b, &b, 50, 50).unwrap();
        assert_eq!(l.total, 0.0);
        assert_eq!(l.assignment.row_to_col, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn shuffled_sets_have_zero_loss() {
        let b = boxes();
        let shuffled = vec![b[2], b[0], b[1]];
        let l = box_loss(&b, &shuffled, 50, 50).unwrap();
        assert_eq!(l.total, 0.0);
        assert_eq!(l.assignment.row_to_col, vec![Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn two_box_hand_computation() {
        let pseudo = vec![PseudoBox::new(10.0, 10.0, 10.0, 10.0), PseudoBox::new(35.0, 35.0, 10.0, 10.0)];
        // Second prediction sits next to the first pseudo box and vice versa.
        let pred = vec![PseudoBox::new(35.0, 35.0, 10.0, 10.0), PseudoBox::new(15.0, 10.0, 10.0, 10.0)];
        let l = box_loss(&pred, &pseudo, 50, 50).unwrap();
        assert_eq!(l.assignment.row_to_col, vec![Some(1), Some(0)]);
        let expected = 0.0 + (0.1 + 2.0 / 3.0);
        assert_relative_eq!(l.total, expected, epsilon = 1e-12);
        let costs: Vec<Vec<f64>> = pred.iter().map(|p| pseudo.iter().map(|q| match_cost(p, q, 50.0, 50.0)).collect()).collect();
        assert_relative_eq!(min_assignment_cost(&costs), expected, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = crate::placer::BoxSet { boxes: boxes(), image_w: 50, image_h: 50, seed: 0, config: Default::default() };
        let b = crate::placer::BoxSet { image_w: 60, ..a.clone() };
        assert!(matches!(box_set_loss(&a, &b), Err(PlacerError::DimensionMismatch { .. })));
        assert!(matches!(box_loss::<f64>(&[], &boxes(), 5, 5), Err(PlacerError::EmptySet)));
    }

    proptest! {
        #[test]
        fn loss_is_order_invariant(
            raw in proptest::collection::vec((0u32..40, 0u32..40, 1u32..10, 1u32..10), 2..7),
            other in proptest::collection::vec((0u32..40, 0u32..40, 1u32..10, 1u32..10), 2..7),
            seed in 0u64..1000,
        ) {
            let mk = |v: &[(u32, u32, u32, u32)]| -> Vec<PseudoBox<f64>> {
                v.iter().map(|&(x, y, w, h)| PseudoBox::from_corner(x as f64, y as f64, w as f64, h as f64)).collect()
            };
            let (a, b) = (mk(&raw), mk(&other));
            let base = box_loss(&a, &b, 50, 50).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (mut a2, mut b2) = (a.clone(), b.clone());
            a2.shuffle(&mut rng);
            b2.shuffle(&mut rng);
            let again = box_loss(&a2, &b2, 50, 50).unwrap();
            prop_assert!((base.total - again.total).abs() <= 1e-12);
        }
    }
}
