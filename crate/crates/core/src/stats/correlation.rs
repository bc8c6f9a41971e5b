use crate::scalar::Scalar;

use super::{CorrelationEstimate, StatsError};

/// Estimator used for the lag-1 autocorrelation of a single series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum RhoEstimator {
    /// Pearson correlation of the pairs `(x_t, x_{t-1})`, each half centred on
    /// its own mean.
    #[default]
    LaggedPearson,
    /// Classical ACF estimator: pooled mean, lag-0 sum of squares in the
    /// denominator.
    Acf,
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::count(xs.len())
}

fn is_constant<T: Scalar>(xs: &[T]) -> bool {
    xs.iter().all(|&v| v == xs[0])
}

fn check_finite<T: Scalar>(xs: &[T]) -> Result<(), StatsError> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(StatsError::NonFinite(pos)),
        None => Ok(()),
    }
}

/// Two-pass Pearson correlation. Both slices must be non-constant.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    if is_constant(x) || is_constant(y) {
        return Err(StatsError::DegenerateSeries);
    }
    Ok(pearson_unchecked(x, y))
}

pub(crate) fn pearson_unchecked<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    clamp_unit(sxy / (sxx * syy).sqrt())
}

fn clamp_unit<T: Scalar>(r: T) -> T {
    r.max(-T::one()).min(T::one())
}

/// Lag-1 autocorrelation `cor(x_t, x_{t-1})`.
pub fn lag1_autocorrelation<T: Scalar>(series: &[T]) -> Result<T, StatsError> {
    lag1_autocorrelation_with(series, RhoEstimator::LaggedPearson)
}

pub fn lag1_autocorrelation_with<T: Scalar>(series: &[T], estimator: RhoEstimator) -> Result<T, StatsError> {
    let n = series.len();
    if n < 3 {
        return Err(StatsError::TooShort { needed: 3, got: n });
    }
    check_finite(series)?;
    let lead = &series[1..];
    let lag = &series[..n - 1];
    if is_constant(lead) || is_constant(lag) {
        return Err(StatsError::DegenerateSeries);
    }
    match estimator {
        RhoEstimator::LaggedPearson => Ok(pearson_unchecked(lead, lag)),
        RhoEstimator::Acf => {
            let m = mean(series);
            let denom: T = series.iter().map(|&v| (v - m) * (v - m)).sum();
            let num: T = lead.iter().zip(lag).map(|(&a, &b)| (a - m) * (b - m)).sum();
            Ok(clamp_unit(num / denom))
        }
    }
}

/// Point-biserial correlation between 0/1 labels and a continuous series.
pub fn point_biserial<T: Scalar>(labels: &[bool], values: &[T]) -> Result<CorrelationEstimate<T>, StatsError> {
    if labels.len() != values.len() {
        return Err(StatsError::LengthMismatch { left: labels.len(), right: values.len() });
    }
    let n = values.len();
    if n < 3 {
        return Err(StatsError::TooShort { needed: 3, got: n });
    }
    check_finite(values)?;
    let ones = labels.iter().filter(|&&l| l).count();
    if ones == 0 || ones == n {
        return Err(StatsError::DegenerateLabels);
    }
    if is_constant(values) {
        return Err(StatsError::DegenerateSeries);
    }
    let coded: Vec<T> = labels.iter().map(|&l| if l { T::one() } else { T::zero() }).collect();
    Ok(CorrelationEstimate { r: pearson_unchecked(&coded, values), n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_series_is_minus_one() {
        let x = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!(f64::abs(lag1_autocorrelation(&x).unwrap() + 1.0) < 1e-15);
    }

    #[test]
    fn affine_series_is_one() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!(f64::abs(lag1_autocorrelation(&x).unwrap() - 1.0) < 1e-15);
    }

    #[test]
    fn lag1_errors() {
        assert_eq!(lag1_autocorrelation(&[1.0, 2.0]), Err(StatsError::TooShort { needed: 3, got: 2 }));
        assert_eq!(lag1_autocorrelation(&[2.0, 2.0, 2.0, 2.0]), Err(StatsError::DegenerateSeries));
        // lagged half [5, 1, 1] is fine but lead half [1, 1, 1] is constant
        assert_eq!(lag1_autocorrelation(&[5.0, 1.0, 1.0, 1.0]), Err(StatsError::DegenerateSeries));
        assert_eq!(lag1_autocorrelation(&[1.0, f64::NAN, 3.0]), Err(StatsError::NonFinite(1)));
    }

    #[test]
    fn acf_estimator_differs_from_pearson() {
        let x = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let acf = lag1_autocorrelation_with(&x, RhoEstimator::Acf).unwrap();
        // Σ(x_t − ½)(x_{t−1} − ½) = −7/4, Σ(x_t − ½)² = 2
        assert!(f64::abs(acf + 0.875) < 1e-15);
    }

    #[test]
    fn point_biserial_examples() {
        let est = point_biserial(&[false, false, true, true], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(f64::abs(est.r - 1.0) < 1e-15);
        assert_eq!(est.n, 4);
        assert_eq!(
            point_biserial(&[false, true, false, true], &[5.0, 5.0, 5.0, 5.0]),
            Err(StatsError::DegenerateSeries)
        );
        assert_eq!(point_biserial(&[true, true, true], &[1.0, 2.0, 3.0]), Err(StatsError::DegenerateLabels));
        assert_eq!(
            point_biserial(&[true, false], &[1.0, 2.0, 3.0]),
            Err(StatsError::LengthMismatch { left: 2, right: 3 })
        );
    }

    /// Pearson evaluated with compensated (double-double style) sums as an
    /// extended-precision reference.
    fn pearson_reference(x: &[f64], y: &[f64]) -> f64 {
        fn two_sum(a: f64, b: f64) -> (f64, f64) {
            let s = a + b;
            let bb = s - a;
            (s, (a - (s - bb)) + (b - bb))
        }
        fn ksum(it: impl Iterator<Item = f64>) -> f64 {
            let (mut s, mut c) = (0.0, 0.0);
            for v in it {
                let (t, e) = two_sum(s, v);
                s = t;
                c += e;
            }
            s + c
        }
        let n = x.len() as f64;
        let mx = ksum(x.iter().copied()) / n;
        let my = ksum(y.iter().copied()) / n;
        let sxy = ksum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
        let sxx = ksum(x.iter().map(|a| (a - mx) * (a - mx)));
        let syy = ksum(y.iter().map(|b| (b - my) * (b - my)));
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn point_biserial_matches_reference_on_fixture() {
        let labels = [0u8, 1, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 0];
        let values = [
            0.31, 1.72, -0.44, 0.05, 2.13, 0.98, -1.20, 1.41, 0.22, -0.67, 0.59, 1.05, 0.77, -0.15, 1.93, 0.40, -0.90,
            0.66, 0.12, -0.33,
        ];
        let l: Vec<bool> = labels.iter().map(|&c| c == 1).collect();
        let coded: Vec<f64> = labels.iter().map(|&c| f64::from(c)).collect();
        let got = point_biserial(&l, &values).unwrap();
        assert!(f64::abs(got.r - pearson_reference(&coded, &values)) < 1e-12);
        assert_eq!(got.n, 20);
    }
}
