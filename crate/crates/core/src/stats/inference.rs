use crate::scalar::Scalar;

use super::special::{normal_quantile, regularized_beta_split};
use super::{ConfidenceInterval, StatsError};

/// Correlation test statistic `r · sqrt(df / (1 − r²))`.
///
/// `df` is `n − 2` for the pooled test and `n_eff − 2` after correction.
pub fn t_statistic<T: Scalar>(r: T, df: T) -> Result<T, StatsError> {
    if !(r.abs() < T::one()) {
        return Err(StatsError::InvalidCorrelation(r.to_f64_lossy()));
    }
    if !(df > T::zero()) {
        return Err(StatsError::InvalidDf(df.to_f64_lossy()));
    }
    Ok(r * (df / (T::one() - r * r)).sqrt())
}

/// Two-sided tail probability `2 · P(T > |t|)` for Student's t with possibly
/// fractional `df`.
///
/// Uses `2·P(T > |t|) = I_{df/(df+t²)}(df/2, 1/2)`. Underflow is clamped to
/// the smallest positive value so the result stays in `(0, 1]`.
pub fn t_two_sided_p<T: Scalar>(t: T, df: T) -> Result<T, StatsError> {
    if !(df > T::zero()) || !df.is_finite() {
        return Err(StatsError::InvalidDf(df.to_f64_lossy()));
    }
    if t.is_nan() {
        return Err(StatsError::NonFinite(0));
    }
    if t.is_infinite() {
        return Ok(T::min_positive_value());
    }
    let t2 = t * t;
    let denom = df + t2;
    let x = df / denom;
    let y = t2 / denom;
    let half = T::lit(0.5);
    let p = regularized_beta_split(df * half, half, x, y).ok_or(StatsError::NoConvergence)?;
    Ok(p.max(T::min_positive_value()).min(T::one()))
}

/// Fisher-z confidence interval for a correlation, using `n_eff − 3` as the
/// variance denominator.
pub fn fisher_ci<T: Scalar>(r: T, n_eff: T, level: T) -> Result<ConfidenceInterval<T>, StatsError> {
    if !(r.abs() < T::one()) {
        return Err(StatsError::InvalidCorrelation(r.to_f64_lossy()));
    }
    let three = T::lit(3.0);
    if !(n_eff > three) {
        return Err(StatsError::InsufficientNeff { n_eff: n_eff.to_f64_lossy(), min: 3.0 });
    }
    if !(level > T::zero() && level < T::one()) {
        return Err(StatsError::InvalidLevel(level.to_f64_lossy()));
    }
    let z_crit = normal_quantile(T::one() - (T::one() - level) / T::lit(2.0)).ok_or(StatsError::InvalidLevel(level.to_f64_lossy()))?;
    let z = r.atanh();
    let half_width = z_crit / (n_eff - three).sqrt();
    Ok(ConfidenceInterval { lower: (z - half_width).tanh(), upper: (z + half_width).tanh(), level })
}
