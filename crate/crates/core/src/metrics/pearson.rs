use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("a series has zero variance; correlation is undefined")]
    ZeroVariance,
}

/// Sample Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson<T: Real>(xs: &[T], ys: &[T]) -> Result<T, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples(xs.len()));
    }
    let n = T::of(xs.len() as f64);
    let mx = xs.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = ys.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn examples() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        assert_relative_eq!(pearson(&xs, &xs).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = xs.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&xs, &neg).unwrap(), -1.0, epsilon = 1e-15);
        // 3 / sqrt(2 * 42/9)
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(r, 3.0 / (2.0f64 * 42.0 / 9.0).sqrt(), epsilon = 1e-12);
        assert!((r - 0.9819).abs() < 1e-4);
        let r32 = pearson(&[1.0f32, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r32 - 0.98198).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson(&[1.0], &[2.0]), Err(StatsError::TooFewSamples(1)));
        assert_eq!(pearson(&[1.0, 2.0], &[2.0]), Err(StatsError::LengthMismatch(2, 1)));
    }
}
