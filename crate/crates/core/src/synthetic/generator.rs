use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::stats::special::{normal_pdf, normal_quantile};
use crate::stats::{BinarySeries, Series};

use super::SyntheticError;

/// Stationary AR(1) draw of `length` values from `rng`.
///
/// `x_1 ~ N(0, 1)` and the innovations have variance `1 − ρ²`, so every
/// marginal is standard normal.
pub fn ar1_from<R: Rng + ?Sized>(rng: &mut R, length: usize, rho: f64) -> Result<Vec<f64>, SyntheticError> {
    if !(rho.abs() < 1.0) {
        return Err(SyntheticError::InvalidRho(rho));
    }
    if length == 0 {
        return Err(SyntheticError::InvalidLength(0));
    }
    let scale = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(length);
    let mut x: f64 = rng.sample(StandardNormal);
    out.push(x);
    for _ in 1..length {
        let e: f64 = rng.sample(StandardNormal);
        x = rho * x + scale * e;
        out.push(x);
    }
    Ok(out)
}

/// Seeded stationary AR(1) series.
pub fn generate_ar1(length: usize, rho: f64, seed: u64) -> Result<Series<f64>, SyntheticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = ar1_from(&mut rng, length, rho)?;
    Ok(Series::new(values).expect("AR(1) output is finite and non-empty"))
}

/// Noise scale and threshold for thresholded-latent labels.
///
/// Labels are `1[s·x + η > τ]` with `x ~ N(0, 1)`, `η ~ N(0, σ²)` and
/// `s = sign(r_true)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCalibration {
    pub sigma: f64,
    pub tau: f64,
    pub sign: f64,
}

/// Largest point-biserial correlation a thresholded standard normal can
/// reach at this base rate: `φ(c) / sqrt(p(1 − p))` with `c = Φ⁻¹(1 − p)`.
pub fn max_point_biserial(base_rate: f64) -> Result<f64, SyntheticError> {
    if !(base_rate > 0.0 && base_rate < 1.0) {
        return Err(SyntheticError::InvalidBaseRate(base_rate));
    }
    let c = normal_quantile(1.0 - base_rate).ok_or(SyntheticError::InvalidBaseRate(base_rate))?;
    Ok(normal_pdf(c) / (base_rate * (1.0 - base_rate)).sqrt())
}

/// Solves `(σ, τ)` so the population point-biserial between `x` and the label
/// is `r_true` and the population base rate is `base_rate`.
///
/// With `w = x + η ~ N(0, 1 + σ²)`, the label rate fixes `τ = sqrt(1 + σ²)·c`
/// and `cor(x, 1[w > τ]) = φ(c) / (sqrt(1 + σ²)·sqrt(p(1 − p)))`, which is
/// inverted directly for `σ`. `r_true = 0` has no finite `σ` and is
/// rejected; [`labels_from`] handles it with independent draws.
pub fn calibrate_labels(r_true: f64, base_rate: f64) -> Result<LabelCalibration, SyntheticError> {
    if !(r_true.abs() < 1.0) {
        return Err(SyntheticError::InvalidCorrelation(r_true));
    }
    let bound = max_point_biserial(base_rate)?;
    if r_true == 0.0 {
        return Err(SyntheticError::InvalidCorrelation(r_true));
    }
    let c = normal_quantile(1.0 - base_rate).ok_or(SyntheticError::InvalidBaseRate(base_rate))?;
    let s = bound / r_true.abs();
    if s < 1.0 {
        return Err(SyntheticError::Infeasible { r_true, base_rate, max: bound });
    }
    Ok(LabelCalibration { sigma: (s * s - 1.0).sqrt(), tau: s * c, sign: r_true.signum() })
}

/// Labels for `metric` with population correlation `r_true` and rate
/// `base_rate`, drawn from `rng`. `r_true = 0` gives i.i.d. Bernoulli labels.
pub fn labels_from<R: Rng + ?Sized>(
    rng: &mut R,
    metric: &[f64],
    r_true: f64,
    base_rate: f64,
) -> Result<Vec<bool>, SyntheticError> {
    if r_true == 0.0 {
        max_point_biserial(base_rate)?;
        return Ok(metric.iter().map(|_| rng.random::<f64>() < base_rate).collect());
    }
    let cal = calibrate_labels(r_true, base_rate)?;
    Ok(metric
        .iter()
        .map(|&x| {
            let eta: f64 = rng.sample(StandardNormal);
            cal.sign * x + cal.sigma * eta > cal.tau
        })
        .collect())
}

/// Seeded labels for `metric`; see [`labels_from`].
pub fn attach_labels(metric: &[f64], r_true: f64, base_rate: f64, seed: u64) -> Result<BinarySeries, SyntheticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(BinarySeries::new(labels_from(&mut rng, metric, r_true, base_rate)?))
}

/// Labels independent of any metric: a thresholded AR(1) latent with the
/// given persistence, so label runs are serially dependent.
pub fn persistent_null_labels<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    persistence: f64,
    base_rate: f64,
) -> Result<Vec<bool>, SyntheticError> {
    max_point_biserial(base_rate)?;
    let c = normal_quantile(1.0 - base_rate).ok_or(SyntheticError::InvalidBaseRate(base_rate))?;
    Ok(ar1_from(rng, length, persistence)?.into_iter().map(|z| z > c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::normal_cdf;

    /// Population moments of `1[s·x + σ·η > τ]` by quadrature over `x`.
    fn integrated_moments(cal: LabelCalibration) -> (f64, f64) {
        let (lo, hi, steps) = (-10.0, 10.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let (mut rate, mut ex) = (0.0, 0.0);
        for i in 0..=steps {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let hit = 1.0 - normal_cdf((cal.tau - cal.sign * x) / cal.sigma);
            rate += w * h * normal_pdf(x) * hit;
            ex += w * h * x * normal_pdf(x) * hit;
        }
        (rate, ex / (rate * (1.0 - rate)).sqrt())
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (r, p) in [(0.10, 0.2), (0.3, 0.5), (-0.25, 0.1), (0.6, 0.35)] {
            let cal = calibrate_labels(r, p).unwrap();
            let (rate, corr) = integrated_moments(cal);
            assert!((rate - p).abs() < 1e-9, "rate {rate} vs {p}");
            assert!((corr - r).abs() < 1e-9, "corr {corr} vs {r}");
        }
    }

    #[test]
    fn attainability_bound_by_quadrature() {
        // max over thresholds of E[x·1[x > c]] / sqrt(p(1-p)) at p = 0.5
        let bound = max_point_biserial(0.5).unwrap();
        let (lo, steps) = (0.0, 100_000);
        let h = 10.0 / steps as f64;
        let mut ex = 0.0;
        for i in 0..=steps {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            ex += w * h * x * normal_pdf(x);
        }
        assert!((bound - ex / 0.5).abs() < 1e-9);
        assert!(matches!(calibrate_labels(0.99, 0.5), Err(SyntheticError::Infeasible { .. })));
        assert!(calibrate_labels(0.79, 0.5).is_ok());
    }

    #[test]
    fn ar1_contract() {
        assert!(matches!(generate_ar1(10, 1.0, 0), Err(SyntheticError::InvalidRho(_))));
        assert_eq!(generate_ar1(1, 0.5, 3).unwrap().len(), 1);
        assert_eq!(generate_ar1(50, 0.5, 3).unwrap(), generate_ar1(50, 0.5, 3).unwrap());
    }
}
