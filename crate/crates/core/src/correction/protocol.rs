//! Two-stage protocol: pooled screening under BH-FDR, then cluster-robust
//! confirmation of every pooled-significant pair by both the Chelton
//! correction and the conversation bootstrap.

use std::fmt;

use rayon::prelude::*;

use crate::scalar::Scalar;
use crate::stats::{point_biserial, t_statistic, t_two_sided_p, RhoEstimator, StatsError};

use super::bootstrap::{block_bootstrap_p, MIN_REPLICATES};
use super::chelton::{chelton_neff, chelton_p, mean_lag1_rho, RhoOptions, RhoSummary, RhoWeighting};
use super::fdr::bh_fdr;
use super::{EngineError, StudyDataset};

/// Metrics whose mean lag-1 autocorrelation exceeds this are flagged high-risk.
pub const HIGH_RISK_RHO: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum FdrScope {
    /// One BH family over every tested metric-label pair.
    #[default]
    Joint,
    /// A separate BH family per label.
    PerLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub q: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub fdr_scope: FdrScope,
    pub rho_estimator: RhoEstimator,
    pub rho_weighting: RhoWeighting,
    pub min_conv_len: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            q: 0.05,
            bootstrap_b: 2000,
            seed: 0,
            fdr_scope: FdrScope::Joint,
            rho_estimator: RhoEstimator::LaggedPearson,
            rho_weighting: RhoWeighting::Unweighted,
            min_conv_len: 5,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EngineError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(EngineError::Config(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.bootstrap_b < MIN_REPLICATES {
            return Err(EngineError::Config(format!(
                "bootstrap_B must be at least {MIN_REPLICATES}, got {}",
                self.bootstrap_b
            )));
        }
        if self.min_conv_len < 3 {
            return Err(EngineError::Config(format!("min_conv_len must be at least 3, got {}", self.min_conv_len)));
        }
        if self.workers == Some(0) {
            return Err(EngineError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn rho_options(&self) -> RhoOptions {
        RhoOptions { estimator: self.rho_estimator, weighting: self.rho_weighting, min_turns: self.min_conv_len }
    }
}

/// Runs `f` on a dedicated pool of `workers` threads, or inline on the global
/// pool when `workers` is `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, EngineError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EngineError::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Machine-readable reason a pair has no robust verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipReason {
    NotPooledSignificant,
    DegenerateLabels,
    DegenerateMetric,
    TooFewPairs,
    PerfectCorrelation,
    NonFinite,
    NoEligibleConversations,
    TooFewConversations,
    DegenerateReplicateBudget,
}

impl SkipReason {
    pub const ALL: [SkipReason; 9] = [
        SkipReason::NotPooledSignificant,
        SkipReason::DegenerateLabels,
        SkipReason::DegenerateMetric,
        SkipReason::TooFewPairs,
        SkipReason::PerfectCorrelation,
        SkipReason::NonFinite,
        SkipReason::NoEligibleConversations,
        SkipReason::TooFewConversations,
        SkipReason::DegenerateReplicateBudget,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SkipReason::NotPooledSignificant => "not_pooled_significant",
            SkipReason::DegenerateLabels => "degenerate_labels",
            SkipReason::DegenerateMetric => "degenerate_metric",
            SkipReason::TooFewPairs => "too_few_pairs",
            SkipReason::PerfectCorrelation => "perfect_correlation",
            SkipReason::NonFinite => "non_finite",
            SkipReason::NoEligibleConversations => "no_eligible_conversations",
            SkipReason::TooFewConversations => "too_few_conversations",
            SkipReason::DegenerateReplicateBudget => "degenerate_replicate_budget",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }

    fn from_stats(err: &StatsError) -> Self {
        match err {
            StatsError::TooShort { .. } => SkipReason::TooFewPairs,
            StatsError::DegenerateSeries => SkipReason::DegenerateMetric,
            StatsError::DegenerateLabels => SkipReason::DegenerateLabels,
            StatsError::InvalidCorrelation(_) => SkipReason::PerfectCorrelation,
            _ => SkipReason::NonFinite,
        }
    }

    fn from_engine(err: &EngineError) -> Option<Self> {
        match err {
            EngineError::Stats(e) => Some(Self::from_stats(e)),
            EngineError::LabelMonoculture(_) => Some(SkipReason::DegenerateLabels),
            EngineError::TooFewConversations(_) => Some(SkipReason::TooFewConversations),
            EngineError::DegenerateReplicateBudget { .. } => Some(SkipReason::DegenerateReplicateBudget),
            EngineError::NoEligibleConversations(_) => Some(SkipReason::NoEligibleConversations),
            _ => None,
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobustStatus {
    Robust,
    Weak,
}

/// Final status of a metric-label pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairStatus {
    Robust,
    Weak,
    Skipped(SkipReason),
}

impl fmt::Display for PairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairStatus::Robust => f.write_str("ROBUST"),
            PairStatus::Weak => f.write_str("WEAK"),
            PairStatus::Skipped(reason) => write!(f, "SKIPPED({reason})"),
        }
    }
}

impl PairStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ROBUST" => Some(PairStatus::Robust),
            "WEAK" => Some(PairStatus::Weak),
            _ => s
                .strip_prefix("SKIPPED(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(SkipReason::from_code)
                .map(PairStatus::Skipped),
        }
    }
}

/// Stage-1 result for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledTestResult<T> {
    pub metric: String,
    pub label: String,
    pub r_obs: T,
    pub n: usize,
    pub t: T,
    pub p_pooled: T,
    pub q_value: T,
    pub pooled_significant: bool,
}

/// Stage-2 result for a pooled-significant pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustTestResult<T> {
    pub pooled: PooledTestResult<T>,
    pub rho_bar: T,
    pub rho_conversation_count: usize,
    pub n_eff: T,
    pub p_chelton: T,
    /// `n_eff ≤ 2`: the corrected test has no degrees of freedom left and
    /// `p_chelton` is reported as 1.
    pub neff_collapsed: bool,
    pub p_boot: T,
    pub bootstrap_b: usize,
    pub bootstrap_valid: usize,
    pub p_final: T,
    pub status: RobustStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair<T> {
    pub metric: String,
    pub label: String,
    pub reason: SkipReason,
    pub pooled: Option<PooledTestResult<T>>,
    pub rho_bar: Option<T>,
    pub n_eff: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairResult<T> {
    Confirmed(RobustTestResult<T>),
    Skipped(SkippedPair<T>),
}

impl<T: Scalar> PairResult<T> {
    pub fn metric(&self) -> &str {
        match self {
            PairResult::Confirmed(r) => &r.pooled.metric,
            PairResult::Skipped(s) => &s.metric,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            PairResult::Confirmed(r) => &r.pooled.label,
            PairResult::Skipped(s) => &s.label,
        }
    }

    pub fn pooled(&self) -> Option<&PooledTestResult<T>> {
        match self {
            PairResult::Confirmed(r) => Some(&r.pooled),
            PairResult::Skipped(s) => s.pooled.as_ref(),
        }
    }

    pub fn robust(&self) -> Option<&RobustTestResult<T>> {
        match self {
            PairResult::Confirmed(r) => Some(r),
            PairResult::Skipped(_) => None,
        }
    }

    pub fn status(&self) -> PairStatus {
        match self {
            PairResult::Confirmed(r) => match r.status {
                RobustStatus::Robust => PairStatus::Robust,
                RobustStatus::Weak => PairStatus::Weak,
            },
            PairResult::Skipped(s) => PairStatus::Skipped(s.reason),
        }
    }
}

/// Per-metric autocorrelation audit row.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow<T> {
    pub metric: String,
    /// Observed values pooled over conversations.
    pub n: usize,
    /// Conversations with at least one observed value.
    pub k: usize,
    pub rho: Option<RhoSummary<T>>,
    pub n_eff: Option<T>,
    /// `n / n_eff`.
    pub reduction: Option<T>,
    pub high_risk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScreenEntry<T> {
    Tested(PooledTestResult<T>),
    Skipped { metric: String, label: String, reason: SkipReason },
}

impl<T> ScreenEntry<T> {
    pub fn metric(&self) -> &str {
        match self {
            ScreenEntry::Tested(p) => &p.metric,
            ScreenEntry::Skipped { metric, .. } => metric,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ScreenEntry::Tested(p) => &p.label,
            ScreenEntry::Skipped { label, .. } => label,
        }
    }
}

/// Stage-1 output over the full metric × label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenReport<T> {
    pub entries: Vec<ScreenEntry<T>>,
}

impl<T: Scalar> ScreenReport<T> {
    pub fn n_pooled_sig(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e, ScreenEntry::Tested(p) if p.pooled_significant)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport<T> {
    /// One entry per metric × label, metrics outer, both in registry order.
    pub results: Vec<PairResult<T>>,
    pub audit: Vec<AuditRow<T>>,
    pub n_pooled_sig: usize,
    pub n_robust: usize,
    pub inflation_rate: Option<T>,
    pub k: usize,
    pub total_turns: usize,
    pub config: RunConfig,
}

/// Fraction of pooled-significant findings that fail confirmation; `None`
/// when nothing was pooled-significant.
pub fn inflation_rate<T: Scalar>(n_pooled_sig: usize, n_robust: usize) -> Result<Option<T>, EngineError> {
    if n_robust > n_pooled_sig {
        return Err(EngineError::CountInversion { pooled: n_pooled_sig, robust: n_robust });
    }
    if n_pooled_sig == 0 {
        return Ok(None);
    }
    Ok(Some(T::count(n_pooled_sig - n_robust) / T::count(n_pooled_sig)))
}

/// Pooled point-biserial test on the concatenated pairs.
pub fn pooled_test<T: Scalar>(
    dataset: &StudyDataset<T>,
    metric: &str,
    label: &str,
) -> Result<(T, usize, T, T), StatsError> {
    let (values, labels) = dataset.pooled(metric, label);
    let est = point_biserial(&labels, &values)?;
    let df = T::count(est.n - 2);
    let t = t_statistic(est.r, df)?;
    let p = t_two_sided_p(t, df)?;
    Ok((est.r, est.n, t, p))
}

/// Stage 1: pooled tests for every metric-label pair, then BH-FDR.
pub fn screen<T: Scalar>(dataset: &StudyDataset<T>, config: &RunConfig) -> Result<ScreenReport<T>, EngineError> {
    config.validate()?;
    let grid: Vec<(&str, &str)> = dataset
        .metric_names()
        .iter()
        .flat_map(|m| dataset.label_names().iter().map(move |l| (m.as_str(), l.as_str())))
        .collect();
    let mut entries: Vec<ScreenEntry<T>> = grid
        .par_iter()
        .map(|&(metric, label)| match pooled_test(dataset, metric, label) {
            Ok((r_obs, n, t, p_pooled)) => ScreenEntry::Tested(PooledTestResult {
                metric: metric.to_string(),
                label: label.to_string(),
                r_obs,
                n,
                t,
                p_pooled,
                q_value: T::one(),
                pooled_significant: false,
            }),
            Err(e) => ScreenEntry::Skipped {
                metric: metric.to_string(),
                label: label.to_string(),
                reason: SkipReason::from_stats(&e),
            },
        })
        .collect();

    let families: Vec<Vec<usize>> = match config.fdr_scope {
        FdrScope::Joint => vec![(0..entries.len()).collect()],
        FdrScope::PerLabel => dataset
            .label_names()
            .iter()
            .map(|l| (0..entries.len()).filter(|&i| entries[i].label() == l).collect())
            .collect(),
    };
    let q = T::lit(config.q);
    for family in families {
        let tested: Vec<usize> = family.into_iter().filter(|&i| matches!(entries[i], ScreenEntry::Tested(_))).collect();
        if tested.is_empty() {
            continue;
        }
        let ps: Vec<T> = tested
            .iter()
            .map(|&i| match &entries[i] {
                ScreenEntry::Tested(p) => p.p_pooled,
                ScreenEntry::Skipped { .. } => unreachable!(),
            })
            .collect();
        let fdr = bh_fdr(&ps, q)?;
        for (j, &i) in tested.iter().enumerate() {
            if let ScreenEntry::Tested(p) = &mut entries[i] {
                p.q_value = fdr.q_values[j];
                p.pooled_significant = fdr.rejected[j];
            }
        }
    }
    Ok(ScreenReport { entries })
}

/// Autocorrelation audit for every metric.
pub fn audit<T: Scalar>(dataset: &StudyDataset<T>, config: &RunConfig) -> Vec<AuditRow<T>> {
    let options = config.rho_options();
    dataset
        .metric_names()
        .par_iter()
        .map(|metric| {
            let n = dataset.observed_count(metric);
            let k = dataset
                .conversations()
                .iter()
                .filter(|c| c.metric(metric).is_some_and(|col| col.iter().any(Option::is_some)))
                .count();
            let rho = mean_lag1_rho(dataset, metric, &options).ok();
            let n_eff = rho.and_then(|s| chelton_neff(n, s.rho_bar, k.max(1)).ok());
            let reduction = n_eff.map(|ne| T::count(n) / ne);
            let high_risk = rho.is_some_and(|s| s.rho_bar > T::lit(HIGH_RISK_RHO));
            AuditRow { metric: metric.clone(), n, k, rho, n_eff, reduction, high_risk }
        })
        .collect()
}

/// Conversations contributing at least one pair; the lower bound on `n_eff`.
fn pair_k<T: Scalar>(dataset: &StudyDataset<T>, pooled: &PooledTestResult<T>) -> usize {
    dataset
        .conversations()
        .iter()
        .filter(|c| !c.paired(&pooled.metric, &pooled.label).0.is_empty())
        .count()
        .max(1)
}

fn confirm_pair<T: Scalar>(
    dataset: &StudyDataset<T>,
    pooled: &PooledTestResult<T>,
    rho: Option<RhoSummary<T>>,
    config: &RunConfig,
) -> PairResult<T> {
    let skip = |reason, rho_bar: Option<T>, n_eff: Option<T>| {
        PairResult::Skipped(SkippedPair {
            metric: pooled.metric.clone(),
            label: pooled.label.clone(),
            reason,
            pooled: Some(pooled.clone()),
            rho_bar,
            n_eff,
        })
    };
    let Some(rho) = rho else {
        return skip(SkipReason::NoEligibleConversations, None, None);
    };
    let n_eff = match chelton_neff(pooled.n, rho.rho_bar, pair_k(dataset, pooled)) {
        Ok(v) => v,
        Err(_) => return skip(SkipReason::NoEligibleConversations, Some(rho.rho_bar), None),
    };
    let (p_chelton, neff_collapsed) = match chelton_p(pooled.r_obs, n_eff) {
        Ok(p) => (p, false),
        Err(EngineError::InsufficientNeff(_)) => (T::one(), true),
        Err(e) => {
            let reason = SkipReason::from_engine(&e).unwrap_or(SkipReason::NonFinite);
            return skip(reason, Some(rho.rho_bar), Some(n_eff));
        }
    };
    let boot = match block_bootstrap_p(dataset, &pooled.metric, &pooled.label, config.bootstrap_b, config.seed) {
        Ok(b) => b,
        Err(e) => {
            let reason = SkipReason::from_engine(&e).unwrap_or(SkipReason::NonFinite);
            return skip(reason, Some(rho.rho_bar), Some(n_eff));
        }
    };
    let p_final = p_chelton.max(boot.p_boot);
    let status = if p_final < T::lit(config.alpha) { RobustStatus::Robust } else { RobustStatus::Weak };
    PairResult::Confirmed(RobustTestResult {
        pooled: pooled.clone(),
        rho_bar: rho.rho_bar,
        rho_conversation_count: rho.used_conversations,
        n_eff,
        p_chelton,
        neff_collapsed,
        p_boot: boot.p_boot,
        bootstrap_b: boot.replicates,
        bootstrap_valid: boot.valid_replicates,
        p_final,
        status,
    })
}

/// Stage 2 over a prior screen of the same dataset.
pub fn confirm<T: Scalar>(
    dataset: &StudyDataset<T>,
    screen: &ScreenReport<T>,
    config: &RunConfig,
) -> Result<ProtocolReport<T>, EngineError> {
    config.validate()?;
    let audit_rows = audit(dataset, config);
    let audit_for = |metric: &str| audit_rows.iter().find(|a| a.metric == metric);

    let results: Vec<PairResult<T>> = screen
        .entries
        .par_iter()
        .map(|entry| match entry {
            ScreenEntry::Skipped { metric, label, reason } => {
                let row = audit_for(metric);
                PairResult::Skipped(SkippedPair {
                    metric: metric.clone(),
                    label: label.clone(),
                    reason: *reason,
                    pooled: None,
                    rho_bar: row.and_then(|a| a.rho.map(|r| r.rho_bar)),
                    n_eff: row.and_then(|a| a.n_eff),
                })
            }
            ScreenEntry::Tested(pooled) if !pooled.pooled_significant => {
                let rho = audit_for(&pooled.metric).and_then(|a| a.rho);
                let n_eff = rho.and_then(|r| chelton_neff(pooled.n, r.rho_bar, pair_k(dataset, pooled)).ok());
                PairResult::Skipped(SkippedPair {
                    metric: pooled.metric.clone(),
                    label: pooled.label.clone(),
                    reason: SkipReason::NotPooledSignificant,
                    pooled: Some(pooled.clone()),
                    rho_bar: rho.map(|r| r.rho_bar),
                    n_eff,
                })
            }
            ScreenEntry::Tested(pooled) => {
                let rho = audit_for(&pooled.metric).and_then(|a| a.rho);
                confirm_pair(dataset, pooled, rho, config)
            }
        })
        .collect();

    let n_pooled_sig = screen.n_pooled_sig();
    let n_robust = results.iter().filter(|r| r.status() == PairStatus::Robust).count();
    Ok(ProtocolReport {
        results,
        audit: audit_rows,
        n_pooled_sig,
        n_robust,
        inflation_rate: inflation_rate(n_pooled_sig, n_robust)?,
        k: dataset.k(),
        total_turns: dataset.total_turns(),
        config: config.clone(),
    })
}

/// Full protocol: [`screen`] followed by [`confirm`].
pub fn run_two_stage<T: Scalar>(dataset: &StudyDataset<T>, config: &RunConfig) -> Result<ProtocolReport<T>, EngineError> {
    config.validate()?;
    with_workers(config.workers, || {
        let s = screen(dataset, config)?;
        confirm(dataset, &s, config)
    })?
}
