//! AR(1) metric panels with a known label effect, and the Monte Carlo
//! experiments that measure size and power of pooled versus corrected tests.
//!
//! Conversations come in one block per ρ level. A block's conversations carry
//! only that level's metric column (`ar0.90`, say) plus the shared label
//! column [`LABEL`], so each metric has a homogeneous autocorrelation profile
//! over its own `conversations_per_level` conversations. Conversation `j`
//! draws its metric from `replicate_rng(stream_seed(seed, [metric]), j)` and
//! its labels from a sibling stream.

mod calibration;
mod generator;

use rand::Rng;
use thiserror::Error;

use crate::correction::seed::{replicate_rng, stream_seed};
use crate::correction::{ConversationRecord, EngineError, StudyDataset};

pub use calibration::{
    power_experiment, type1_experiment, CalibrationKind, CalibrationResult, LevelCalibration, Method, MethodRate,
};
pub use generator::{
    ar1_from, attach_labels, calibrate_labels, generate_ar1, labels_from, max_point_biserial, persistent_null_labels,
    LabelCalibration,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error("autocorrelation must satisfy |rho| < 1, got {0}")]
    InvalidRho(f64),
    #[error("series length must be at least 1, got {0}")]
    InvalidLength(usize),
    #[error("base rate must lie in (0, 1), got {0}")]
    InvalidBaseRate(f64),
    #[error("target correlation must satisfy 0 < |r| < 1, got {0}")]
    InvalidCorrelation(f64),
    #[error("r_true = {r_true} is not attainable at base rate {base_rate} (maximum {max:.4})")]
    Infeasible { r_true: f64, base_rate: f64, max: f64 },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("need at least {min} replicates, got {got}")]
    InvalidReplicates { got: usize, min: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_conversations: usize,
    /// Inclusive bounds on conversation length.
    pub length_range: (usize, usize),
    pub rho_levels: Vec<f64>,
    pub conversations_per_level: usize,
    pub r_true: f64,
    pub label_base_rate: f64,
    /// Persistence of the latent behind null labels (`r_true = 0`); zero
    /// gives i.i.d. Bernoulli labels.
    pub null_label_persistence: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_conversations: 100,
            length_range: (30, 500),
            rho_levels: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            conversations_per_level: 20,
            r_true: 0.10,
            label_base_rate: 0.2,
            null_label_persistence: 0.99,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Default panel without an effect, with an extra independent (ρ = 0)
    /// level for the nominal-size check.
    pub fn null_default() -> Self {
        let mut spec = Self { r_true: 0.0, ..Self::default() };
        spec.rho_levels.insert(0, 0.0);
        spec.n_conversations = spec.rho_levels.len() * spec.conversations_per_level;
        spec
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |msg: String| Err(SyntheticError::InvalidSpec(msg));
        if self.rho_levels.is_empty() {
            return bad("at least one rho level is required".into());
        }
        if let Some(&r) = self.rho_levels.iter().find(|r| !(r.abs() < 1.0)) {
            return Err(SyntheticError::InvalidRho(r));
        }
        let (lo, hi) = self.length_range;
        if lo == 0 || lo > hi {
            return bad(format!("length range [{lo}, {hi}] is empty or starts at 0"));
        }
        if self.conversations_per_level == 0 {
            return bad("conversations_per_level must be positive".into());
        }
        let expected = self.rho_levels.len() * self.conversations_per_level;
        if self.n_conversations != expected {
            return bad(format!(
                "n_conversations = {} but {} levels × {} per level = {expected}",
                self.n_conversations,
                self.rho_levels.len(),
                self.conversations_per_level
            ));
        }
        if !(self.null_label_persistence.abs() < 1.0) {
            return Err(SyntheticError::InvalidRho(self.null_label_persistence));
        }
        if self.r_true == 0.0 {
            max_point_biserial(self.label_base_rate)?;
        } else {
            calibrate_labels(self.r_true, self.label_base_rate)?;
        }
        Ok(())
    }
}

/// Metric column name for a ρ level, e.g. `ar0.90`.
pub fn metric_name(rho: f64) -> String {
    format!("ar{rho:.2}")
}

/// The label column of every synthetic study.
pub const LABEL: &str = "y";

/// Builds the synthetic study described by `spec`.
pub fn build_synthetic_study(spec: &SyntheticSpec) -> Result<StudyDataset<f64>, SyntheticError> {
    spec.validate()?;
    let (lo, hi) = spec.length_range;
    let mut lengths_rng = replicate_rng(stream_seed(spec.seed, &["lengths"]), 0);
    let lengths: Vec<usize> = (0..spec.n_conversations).map(|_| lengths_rng.random_range(lo..=hi)).collect();
    let width = (spec.n_conversations - 1).to_string().len();

    let mut conversations = Vec::with_capacity(spec.n_conversations);
    for (j, &len) in lengths.iter().enumerate() {
        let rho = spec.rho_levels[j / spec.conversations_per_level];
        let metric = metric_name(rho);
        let mut mrng = replicate_rng(stream_seed(spec.seed, &[&metric]), j as u64);
        let values = ar1_from(&mut mrng, len, rho)?;
        let mut lrng = replicate_rng(stream_seed(spec.seed, &[LABEL, &metric]), j as u64);
        let labels = if spec.r_true == 0.0 {
            persistent_null_labels(&mut lrng, len, spec.null_label_persistence, spec.label_base_rate)?
        } else {
            labels_from(&mut lrng, &values, spec.r_true, spec.label_base_rate)?
        };
        conversations.push(ConversationRecord::complete(
            format!("conv{j:0width$}"),
            vec![(metric, values)],
            vec![(LABEL.to_string(), labels)],
        )?);
    }
    Ok(StudyDataset::new(conversations)?)
}
