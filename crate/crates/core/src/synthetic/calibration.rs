//! Monte Carlo size and power of the pooled and corrected tests.
//!
//! Every replicate builds a fresh panel from `stream_seed(seed, ["replicate",
//! i])` and tests each level's metric against the label column over that
//! level's conversations. With one
//! test per level the BH screen reduces to `p_pooled ≤ q`.

use std::fmt;

use rayon::prelude::*;

use crate::correction::seed::stream_seed;
use crate::correction::{
    block_bootstrap_p, chelton_neff, chelton_p, mean_lag1_rho, pooled_test, with_workers, EngineError,
    RunConfig,
};

use super::{build_synthetic_study, metric_name, SyntheticError, SyntheticSpec, LABEL};

pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationKind {
    /// No effect; rejection rates are false-positive rates.
    Type1,
    /// Effect of size `r_true`; rejection rates are power.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pooled,
    Chelton,
    Bootstrap,
    TwoStage,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pooled, Method::Chelton, Method::Bootstrap, Method::TwoStage];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pooled => "pooled",
            Method::Chelton => "chelton",
            Method::Bootstrap => "bootstrap",
            Method::TwoStage => "two_stage",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodRate {
    pub method: Method,
    pub rejections: usize,
    /// Rejections over completed replicates.
    pub rate: f64,
    /// Monte Carlo standard error `sqrt(rate·(1 − rate)/reps)`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCalibration {
    pub rho: f64,
    pub metric: String,
    pub rates: Vec<MethodRate>,
    pub mean_r: f64,
    pub mean_rho_bar: f64,
    /// Replicates that completed every method.
    pub completed: usize,
    /// Replicates where a test was not computable.
    pub skipped: usize,
}

impl LevelCalibration {
    pub fn rate(&self, method: Method) -> &MethodRate {
        self.rates.iter().find(|r| r.method == method).expect("every method is recorded")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub kind: CalibrationKind,
    pub reps: usize,
    pub alpha: f64,
    pub bootstrap_b: usize,
    pub r_true: f64,
    pub levels: Vec<LevelCalibration>,
}

impl CalibrationResult {
    pub fn level(&self, rho: f64) -> Option<&LevelCalibration> {
        self.levels.iter().find(|l| (l.rho - rho).abs() < 1e-12)
    }

    /// Mean estimated `r` over levels.
    pub fn mean_r(&self) -> f64 {
        self.levels.iter().map(|l| l.mean_r).sum::<f64>() / self.levels.len() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    reject: [bool; 4],
    r: f64,
    rho_bar: f64,
}

fn test_level(
    dataset: &crate::correction::StudyDataset<f64>,
    metric: &str,
    config: &RunConfig,
) -> Result<Draw, EngineError> {
    let (r, n, _, p_pooled) = pooled_test(dataset, metric, LABEL)?;
    let rho = mean_lag1_rho(dataset, metric, &config.rho_options())?;
    let k = dataset.conversations().iter().filter(|c| c.metric(metric).is_some()).count();
    let n_eff = chelton_neff(n, rho.rho_bar, k)?;
    let p_chelton = match chelton_p(r, n_eff) {
        Ok(p) => p,
        Err(EngineError::InsufficientNeff(_)) => 1.0,
        Err(e) => return Err(e),
    };
    let p_boot = block_bootstrap_p(dataset, metric, LABEL, config.bootstrap_b, config.seed)?.p_boot;
    let alpha = config.alpha;
    let screened = p_pooled <= config.q;
    Ok(Draw {
        reject: [p_pooled < alpha, p_chelton < alpha, p_boot < alpha, screened && p_chelton.max(p_boot) < alpha],
        r,
        rho_bar: rho.rho_bar,
    })
}

fn run_experiment(
    kind: CalibrationKind,
    spec: &SyntheticSpec,
    reps: usize,
    config: &RunConfig,
) -> Result<CalibrationResult, SyntheticError> {
    if reps < MIN_REPS {
        return Err(SyntheticError::InvalidReplicates { got: reps, min: MIN_REPS });
    }
    spec.validate()?;
    config.validate()?;
    let metrics: Vec<String> = spec.rho_levels.iter().map(|&r| metric_name(r)).collect();

    let draws: Vec<Vec<Option<Draw>>> = with_workers(config.workers, || {
        (0..reps)
            .into_par_iter()
            .map(|i| -> Result<Vec<Option<Draw>>, SyntheticError> {
                let seed = stream_seed(spec.seed, &["replicate", &i.to_string()]);
                let dataset = build_synthetic_study(&SyntheticSpec { seed, ..spec.clone() })?;
                let cfg = RunConfig { seed, ..config.clone() };
                Ok(metrics.iter().map(|m| test_level(&dataset, m, &cfg).ok()).collect())
            })
            .collect::<Result<Vec<_>, _>>()
    })??;

    let levels = spec
        .rho_levels
        .iter()
        .zip(&metrics)
        .enumerate()
        .map(|(idx, (&rho, metric))| {
            let done: Vec<Draw> = draws.iter().filter_map(|d| d[idx]).collect();
            let completed = done.len();
            let denom = completed.max(1) as f64;
            let rates = Method::ALL
                .iter()
                .enumerate()
                .map(|(mi, &method)| {
                    let rejections = done.iter().filter(|d| d.reject[mi]).count();
                    let rate = rejections as f64 / denom;
                    MethodRate { method, rejections, rate, se: (rate * (1.0 - rate) / denom).sqrt() }
                })
                .collect();
            LevelCalibration {
                rho,
                metric: metric.clone(),
                rates,
                mean_r: done.iter().map(|d| d.r).sum::<f64>() / denom,
                mean_rho_bar: done.iter().map(|d| d.rho_bar).sum::<f64>() / denom,
                completed,
                skipped: reps - completed,
            }
        })
        .collect();

    Ok(CalibrationResult { kind, reps, alpha: config.alpha, bootstrap_b: config.bootstrap_b, r_true: spec.r_true, levels })
}

/// False-positive rates per level and method on panels without an effect.
pub fn type1_experiment(spec: &SyntheticSpec, reps: usize, config: &RunConfig) -> Result<CalibrationResult, SyntheticError> {
    if spec.r_true != 0.0 {
        return Err(SyntheticError::InvalidSpec(format!("type-I experiment needs r_true = 0, got {}", spec.r_true)));
    }
    run_experiment(CalibrationKind::Type1, spec, reps, config)
}

/// Rejection rates per level and method on panels with effect `r_true`.
pub fn power_experiment(spec: &SyntheticSpec, reps: usize, config: &RunConfig) -> Result<CalibrationResult, SyntheticError> {
    if spec.r_true == 0.0 {
        return Err(SyntheticError::InvalidSpec("power experiment needs r_true ≠ 0".into()));
    }
    run_experiment(CalibrationKind::Power, spec, reps, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            rho_levels: vec![0.2, 0.8],
            conversations_per_level: 10,
            n_conversations: 20,
            length_range: (20, 60),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn rejects_small_reps_and_wrong_effect() {
        let cfg = RunConfig { bootstrap_b: 100, ..RunConfig::default() };
        assert!(matches!(power_experiment(&small(), 50, &cfg), Err(SyntheticError::InvalidReplicates { .. })));
        assert!(matches!(type1_experiment(&small(), 100, &cfg), Err(SyntheticError::InvalidSpec(_))));
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let one = RunConfig { bootstrap_b: 100, workers: Some(1), ..RunConfig::default() };
        let four = RunConfig { workers: Some(4), ..one.clone() };
        let a = power_experiment(&small(), 100, &one).unwrap();
        let b = power_experiment(&small(), 100, &four).unwrap();
        assert_eq!(a, b);
        for level in &a.levels {
            for r in &level.rates {
                assert!((0.0..=1.0).contains(&r.rate));
                let want = (r.rate * (1.0 - r.rate) / level.completed as f64).sqrt();
                assert_eq!(r.se, want);
            }
        }
    }
}
