use crate::scalar::Scalar;

use super::StatsError;

/// Exponentially weighted moving average seeded with the first value:
/// `y_1 = x_1`, `y_t = α·x_t + (1 − α)·y_{t−1}`.
pub fn ewma<T: Scalar>(series: &[T], alpha: T) -> Result<Vec<T>, StatsError> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(StatsError::InvalidAlpha(alpha.to_f64_lossy()));
    }
    if series.is_empty() {
        return Err(StatsError::TooShort { needed: 1, got: 0 });
    }
    let keep = T::one() - alpha;
    let mut out = Vec::with_capacity(series.len());
    let mut prev = series[0];
    out.push(prev);
    for &x in &series[1..] {
        prev = alpha * x + keep * prev;
        out.push(prev);
    }
    Ok(out)
}

/// `x_{t+1} − x_t`; one element shorter than the input.
pub fn first_difference<T: Scalar>(series: &[T]) -> Result<Vec<T>, StatsError> {
    if series.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: series.len() });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Running sum; the inverse of [`first_difference`] up to the first element.
pub fn cumulative_sum<T: Scalar>(series: &[T]) -> Vec<T> {
    series
        .iter()
        .scan(T::zero(), |acc, &x| {
            *acc = *acc + x;
            Some(*acc)
        })
        .collect()
}
