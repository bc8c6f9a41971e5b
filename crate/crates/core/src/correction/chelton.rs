use crate::scalar::Scalar;
use crate::stats::{lag1_autocorrelation_with, t_statistic, t_two_sided_p, RhoEstimator};

use super::{EngineError, StudyDataset};

/// How per-conversation autocorrelations are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum RhoWeighting {
    #[default]
    Unweighted,
    /// Weight each conversation by the length of the run its estimate used.
    LengthWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhoOptions {
    pub estimator: RhoEstimator,
    pub weighting: RhoWeighting,
    /// Minimum number of consecutive observed turns for a conversation to
    /// contribute an estimate.
    pub min_turns: usize,
}

impl Default for RhoOptions {
    fn default() -> Self {
        Self { estimator: RhoEstimator::LaggedPearson, weighting: RhoWeighting::Unweighted, min_turns: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSummary<T> {
    pub rho_bar: T,
    pub used_conversations: usize,
}

/// Mean lag-1 autocorrelation of `metric` across eligible conversations.
///
/// A conversation is eligible when its longest gap-free run has at least
/// `min_turns` values and both lagged halves vary. Ineligible conversations
/// are left out of the mean only.
pub fn mean_lag1_rho<T: Scalar>(
    dataset: &StudyDataset<T>,
    metric: &str,
    options: &RhoOptions,
) -> Result<RhoSummary<T>, EngineError> {
    if !dataset.has_metric(metric) {
        return Err(EngineError::UnknownMetric(metric.to_string()));
    }
    let min_turns = options.min_turns.max(3);
    let mut weighted = T::zero();
    let mut weight = T::zero();
    let mut used = 0usize;
    for conv in dataset.conversations() {
        let run = conv.longest_run(metric);
        if run.len() < min_turns {
            continue;
        }
        let Ok(rho) = lag1_autocorrelation_with(&run, options.estimator) else {
            continue;
        };
        let w = match options.weighting {
            RhoWeighting::Unweighted => T::one(),
            RhoWeighting::LengthWeighted => T::count(run.len()),
        };
        weighted = weighted + w * rho;
        weight = weight + w;
        used += 1;
    }
    if used == 0 {
        return Err(EngineError::NoEligibleConversations(metric.to_string()));
    }
    Ok(RhoSummary { rho_bar: weighted / weight, used_conversations: used })
}

/// Effective sample size `n·(1 − ρ̄)/(1 + ρ̄)`, clamped to `[k, n]`.
///
/// Negative `ρ̄` would push the value above `n`; the upper clamp keeps the
/// degrees of freedom at their nominal value instead.
pub fn chelton_neff<T: Scalar>(n: usize, rho_bar: T, k: usize) -> Result<T, EngineError> {
    if n < 2 {
        return Err(EngineError::InvalidCount(format!("n must be at least 2, got {n}")));
    }
    if k < 1 {
        return Err(EngineError::InvalidCount("k must be at least 1".into()));
    }
    if !(rho_bar.abs() < T::one()) {
        return Err(EngineError::InvalidRho(rho_bar.to_f64_lossy()));
    }
    let nf = T::count(n);
    let raw = nf * (T::one() - rho_bar) / (T::one() + rho_bar);
    let lower = T::count(k.min(n));
    Ok(raw.max(lower).min(nf))
}

/// Corrected two-sided p-value: the correlation t test evaluated at
/// `n_eff − 2` degrees of freedom.
pub fn chelton_p<T: Scalar>(r: T, n_eff: T) -> Result<T, EngineError> {
    let two = T::lit(2.0);
    if !(n_eff > two) {
        return Err(EngineError::InsufficientNeff(n_eff.to_f64_lossy()));
    }
    let df = n_eff - two;
    let t = t_statistic(r, df)?;
    Ok(t_two_sided_p(t, df)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correction::ConversationRecord;

    fn single_metric(series: Vec<Vec<f64>>) -> StudyDataset<f64> {
        let convs = series
            .into_iter()
            .enumerate()
            .map(|(i, s)| ConversationRecord::complete(format!("c{i}"), vec![("m".into(), s)], vec![]).unwrap())
            .collect();
        StudyDataset::new(convs).unwrap()
    }

    #[test]
    fn rho_bar_is_plain_mean() {
        // 1,2,...,6 has ρ̂ = 1; alternating has ρ̂ = −1
        let ds = single_metric(vec![
            (1..=6).map(f64::from).collect(),
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ]);
        let s = mean_lag1_rho(&ds, "m", &RhoOptions::default()).unwrap();
        assert!(s.rho_bar.abs() < 1e-15);
        assert_eq!(s.used_conversations, 2);
    }

    #[test]
    fn short_and_constant_conversations_are_ineligible() {
        let ds = single_metric(vec![vec![3.0; 10], vec![1.0, 2.0, 3.0, 4.0]]);
        assert!(matches!(
            mean_lag1_rho(&ds, "m", &RhoOptions::default()),
            Err(EngineError::NoEligibleConversations(_))
        ));
        let ds = single_metric(vec![vec![3.0; 10], (0..8).map(f64::from).collect()]);
        assert_eq!(mean_lag1_rho(&ds, "m", &RhoOptions::default()).unwrap().used_conversations, 1);
    }

    #[test]
    fn length_weighting() {
        let ds = single_metric(vec![(1..=5).map(f64::from).collect(), [1.0, 0.0].repeat(10)]);
        let opts = RhoOptions { weighting: RhoWeighting::LengthWeighted, ..RhoOptions::default() };
        let s = mean_lag1_rho(&ds, "m", &opts).unwrap();
        assert!(f64::abs(s.rho_bar - (5.0 - 20.0) / 25.0) < 1e-12);
    }

    #[test]
    fn neff_examples() {
        assert!(f64::abs(chelton_neff(200, 0.8, 1).unwrap() - 22.2) < 0.05);
        assert!(f64::abs(chelton_neff(11639, 0.928, 202).unwrap() - 435.0) < 1.0);
        assert_eq!(chelton_neff(100, 0.0, 10).unwrap(), 100.0);
        // lower bound k and upper bound n
        assert_eq!(chelton_neff(100, 0.99, 10).unwrap(), 10.0);
        assert_eq!(chelton_neff(100, -0.5, 10).unwrap(), 100.0);
        assert!(matches!(chelton_neff(100, 1.0, 10), Err(EngineError::InvalidRho(_))));
    }

    #[test]
    fn chelton_p_examples() {
        let n_eff = 200.0 * 0.2 / 1.8;
        assert!(f64::abs(chelton_p(0.15, n_eff).unwrap() - 0.51) < 0.01);
        assert!(f64::abs(chelton_p(0.15, 200.0).unwrap() - 0.034) < 0.002);
        assert_eq!(chelton_p(0.0, 50.0).unwrap(), 1.0);
        assert!(matches!(chelton_p(0.3, 2.0), Err(EngineError::InsufficientNeff(_))));
    }
}
