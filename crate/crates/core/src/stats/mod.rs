//! Deterministic numerical primitives: serial dependence, point-biserial
//! correlation, t-distribution tail probabilities with fractional degrees of
//! freedom, Fisher-z intervals and the two series transforms the analysis
//! recommends or warns about.
//!
//! Every function is pure. Degenerate inputs (too short, constant, single
//! class) are hard errors here; skip policies live in [`crate::correction`].

mod correlation;
mod inference;
pub mod special;
mod transform;

use std::ops::Deref;

use thiserror::Error;

use crate::scalar::Scalar;

pub use correlation::{lag1_autocorrelation, lag1_autocorrelation_with, pearson, point_biserial, RhoEstimator};
pub use inference::{fisher_ci, t_statistic, t_two_sided_p};
pub use transform::{cumulative_sum, ewma, first_difference};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series is constant (zero variance)")]
    DegenerateSeries,
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation must satisfy |r| < 1, got {0}")]
    InvalidCorrelation(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
    #[error("effective sample size {n_eff} is at or below the required minimum {min}")]
    InsufficientNeff { n_eff: f64, min: f64 },
    #[error("smoothing factor must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("series contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("special function evaluation did not converge")]
    NoConvergence,
}

/// An ordered, non-empty sequence of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T>(Vec<T>);

impl<T: Scalar> Series<T> {
    pub fn new(values: Vec<T>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::TooShort { needed: 1, got: 0 });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(pos));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Series<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// An ordered sequence of 0/1 labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySeries(Vec<bool>);

impl BinarySeries {
    pub fn new(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    /// Builds from integer codes; `None` if any code is not 0 or 1.
    pub fn from_codes(codes: &[u8]) -> Option<Self> {
        codes
            .iter()
            .map(|&c| match c {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&l| l).count()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl Deref for BinarySeries {
    type Target = [bool];
    fn deref(&self) -> &[bool] {
        &self.0
    }
}

/// A correlation coefficient with the nominal number of pairs behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate<T> {
    pub r: T,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    pub level: T,
}

impl<T: Scalar> ConfidenceInterval<T> {
    pub fn contains(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}
