//! Within-conversation label permutation baseline.
//!
//! The statistic is the number of conversations whose own turn-level
//! point-biserial test is significant at `alpha`. Under the null, labels are
//! shuffled inside each conversation, which keeps per-conversation label
//! counts and the metric's order intact.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::scalar::Scalar;
use crate::stats::{point_biserial, t_statistic, t_two_sided_p};

use super::bootstrap::MIN_REPLICATES;
use super::seed::{replicate_rng, stream_seed};
use super::{EngineError, StudyDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome<T> {
    /// Significant per-conversation tests on the original labels.
    pub observed: usize,
    /// The same count under each of the `B` shuffles.
    pub null_counts: Vec<usize>,
    pub null_mean: T,
    pub null_sd: T,
    /// `(1 + #{null ≥ observed}) / (B + 1)`.
    pub p_meta: T,
    /// Conversations that admit a within-conversation test.
    pub conversations_tested: usize,
}

impl<T: Scalar> PermutationOutcome<T> {
    /// Empirical quantile of the null counts (nearest rank).
    pub fn null_quantile(&self, q: f64) -> usize {
        let mut sorted = self.null_counts.clone();
        sorted.sort_unstable();
        let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        sorted[idx]
    }
}

fn significant<T: Scalar>(labels: &[bool], values: &[T], alpha: T) -> bool {
    let Ok(est) = point_biserial(labels, values) else {
        return false;
    };
    let df = T::count(est.n - 2);
    match t_statistic(est.r, df).and_then(|t| t_two_sided_p(t, df)) {
        Ok(p) => p < alpha,
        Err(_) => false,
    }
}

/// Permutation null for the count of per-conversation significances.
///
/// Conversations whose labels are single-class contribute no test and no
/// shuffle variation; a single-class label overall is an error.
pub fn permutation_baseline<T: Scalar>(
    dataset: &StudyDataset<T>,
    metric: &str,
    label: &str,
    replicates: usize,
    seed: u64,
    alpha: f64,
) -> Result<PermutationOutcome<T>, EngineError> {
    dataset.require_pair(metric, label)?;
    if replicates < MIN_REPLICATES {
        return Err(EngineError::InvalidReplicates { got: replicates, min: MIN_REPLICATES });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::InvalidLevel(alpha));
    }
    let pairs: Vec<(Vec<T>, Vec<bool>)> =
        dataset.conversations().iter().map(|c| c.paired(metric, label)).collect();
    let ones: usize = pairs.iter().map(|(_, l)| l.iter().filter(|&&x| x).count()).sum();
    let total: usize = pairs.iter().map(|(_, l)| l.len()).sum();
    if ones == 0 || ones == total {
        return Err(EngineError::LabelMonoculture(label.to_string()));
    }
    let alpha_t = T::lit(alpha);
    let testable: Vec<&(Vec<T>, Vec<bool>)> =
        pairs.iter().filter(|(v, l)| point_biserial(l, v).is_ok()).collect();
    let observed = testable.iter().filter(|(v, l)| significant(l, v, alpha_t)).count();

    let stream = stream_seed(seed, &["permutation", metric, label]);
    let null_counts: Vec<usize> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(stream, b as u64);
            let mut shuffled = Vec::new();
            testable
                .iter()
                .filter(|(values, labels)| {
                    shuffled.clear();
                    shuffled.extend_from_slice(labels);
                    shuffled.shuffle(&mut rng);
                    significant(&shuffled, values, alpha_t)
                })
                .count()
        })
        .collect();

    let bf = T::count(replicates);
    let null_mean = null_counts.iter().map(|&c| T::count(c)).sum::<T>() / bf;
    let var = null_counts
        .iter()
        .map(|&c| {
            let d = T::count(c) - null_mean;
            d * d
        })
        .sum::<T>()
        / T::count(replicates - 1);
    let exceed = null_counts.iter().filter(|&&c| c >= observed).count();
    Ok(PermutationOutcome {
        observed,
        null_mean,
        null_sd: var.sqrt(),
        p_meta: T::count(exceed + 1) / (bf + T::one()),
        null_counts,
        conversations_tested: testable.len(),
    })
}
