//! Conversation-level block bootstrap.
//!
//! Whole conversations are resampled with replacement, so each replicate keeps
//! the within-conversation serial dependence of the original data.
//!
//! Stream contract: replicate `b` draws from
//! `replicate_rng(pair_seed(seed, metric, label), b)` and takes `k` indices
//! with `random_range(0..k)`; a degenerate draw (single label class or a
//! constant metric) is redrawn from the same generator, at most
//! [`MAX_ATTEMPTS_PER_REPLICATE`] times.

use rand::Rng;
use rayon::prelude::*;

use crate::scalar::Scalar;

use super::seed::{pair_seed, replicate_rng};
use super::{EngineError, StudyDataset};

pub const MIN_REPLICATES: usize = 100;
/// Attempts per replicate, so the whole run is bounded by `10·B` draws.
pub const MAX_ATTEMPTS_PER_REPLICATE: usize = 10;
/// Degenerate draws tolerated, as a fraction of `B`.
pub const DEGENERATE_BUDGET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOutcome<T> {
    /// Two-sided bootstrap p-value, floored at `1/B`.
    pub p_boot: T,
    pub replicates: usize,
    pub valid_replicates: usize,
    pub degenerate_draws: usize,
}

/// Sufficient statistics of one conversation's (metric, label) pairs, with
/// the metric shifted by the pooled mean.
#[derive(Debug, Clone, Copy)]
struct ClusterSums<T> {
    n: usize,
    ones: usize,
    sx: T,
    sxx: T,
    sxl: T,
    min: T,
    max: T,
}

impl<T: Scalar> ClusterSums<T> {
    fn empty() -> Self {
        Self { n: 0, ones: 0, sx: T::zero(), sxx: T::zero(), sxl: T::zero(), min: T::infinity(), max: T::neg_infinity() }
    }

    fn absorb(&mut self, other: &Self) {
        self.n += other.n;
        self.ones += other.ones;
        self.sx = self.sx + other.sx;
        self.sxx = self.sxx + other.sxx;
        self.sxl = self.sxl + other.sxl;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    /// Point-biserial correlation of the concatenated pairs, `None` if
    /// degenerate.
    fn correlation(&self) -> Option<T> {
        if self.ones == 0 || self.ones == self.n || self.min == self.max {
            return None;
        }
        let n = T::count(self.n);
        let sl = T::count(self.ones);
        let num = n * self.sxl - self.sx * sl;
        let vx = n * self.sxx - self.sx * self.sx;
        let vl = n * sl - sl * sl;
        if !(vx > T::zero()) {
            return None;
        }
        Some((num / (vx * vl).sqrt()).max(-T::one()).min(T::one()))
    }
}

fn cluster_sums<T: Scalar>(dataset: &StudyDataset<T>, metric: &str, label: &str) -> Vec<ClusterSums<T>> {
    let per_conv: Vec<(Vec<T>, Vec<bool>)> = dataset
        .conversations()
        .iter()
        .map(|c| c.paired(metric, label))
        .filter(|(v, _)| !v.is_empty())
        .collect();
    let total: usize = per_conv.iter().map(|(v, _)| v.len()).sum();
    let shift = if total == 0 {
        T::zero()
    } else {
        per_conv.iter().flat_map(|(v, _)| v.iter().copied()).sum::<T>() / T::count(total)
    };
    per_conv
        .iter()
        .map(|(values, labels)| {
            let mut s = ClusterSums::<T>::empty();
            s.n = values.len();
            for (&v, &l) in values.iter().zip(labels) {
                let x = v - shift;
                s.sx = s.sx + x;
                s.sxx = s.sxx + x * x;
                if l {
                    s.ones += 1;
                    s.sxl = s.sxl + x;
                }
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
            s
        })
        .collect()
}

/// Draws `k` conversation indices with replacement.
pub fn draw_conversations<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<usize> {
    (0..k).map(|_| rng.random_range(0..k)).collect()
}

/// Two-sided p-value from a bootstrap distribution of correlations:
/// `2·min(P[r_b ≤ 0], P[r_b ≥ 0])`, floored at `1/B` and capped at 1.
pub fn two_sided_bootstrap_p<T: Scalar>(draws: &[T], replicates: usize) -> T {
    let le = draws.iter().filter(|&&r| r <= T::zero()).count();
    let ge = draws.iter().filter(|&&r| r >= T::zero()).count();
    let valid = T::count(draws.len());
    let p = T::lit(2.0) * T::count(le.min(ge)) / valid;
    p.max(T::one() / T::count(replicates)).min(T::one())
}

/// Conversation-level block bootstrap p-value for one metric-label pair.
///
/// Only conversations with at least one observed pair take part; `k` is their
/// count. Replicates run in parallel on the current rayon pool and the result
/// is identical for any pool size.
pub fn block_bootstrap_p<T: Scalar>(
    dataset: &StudyDataset<T>,
    metric: &str,
    label: &str,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapOutcome<T>, EngineError> {
    dataset.require_pair(metric, label)?;
    if replicates < MIN_REPLICATES {
        return Err(EngineError::InvalidReplicates { got: replicates, min: MIN_REPLICATES });
    }
    let clusters = cluster_sums(dataset, metric, label);
    let mut pooled = ClusterSums::empty();
    for c in &clusters {
        pooled.absorb(c);
    }
    if pooled.ones == 0 || pooled.ones == pooled.n {
        return Err(EngineError::LabelMonoculture(label.to_string()));
    }
    let k = clusters.len();
    if k < 2 {
        return Err(EngineError::TooFewConversations(k));
    }

    let stream = pair_seed(seed, metric, label);
    let draws: Vec<(Option<T>, usize)> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(stream, b as u64);
            let mut degenerate = 0;
            for _ in 0..MAX_ATTEMPTS_PER_REPLICATE {
                let mut acc = ClusterSums::empty();
                for idx in draw_conversations(&mut rng, k) {
                    acc.absorb(&clusters[idx]);
                }
                match acc.correlation() {
                    Some(r) => return (Some(r), degenerate),
                    None => degenerate += 1,
                }
            }
            (None, degenerate)
        })
        .collect();

    let degenerate_draws: usize = draws.iter().map(|d| d.1).sum();
    let budget = (DEGENERATE_BUDGET * replicates as f64).floor() as usize;
    if degenerate_draws > budget {
        return Err(EngineError::DegenerateReplicateBudget { degenerate: degenerate_draws, budget });
    }
    let valid: Vec<T> = draws.into_iter().filter_map(|d| d.0).collect();
    Ok(BootstrapOutcome {
        p_boot: two_sided_bootstrap_p(&valid, replicates),
        replicates,
        valid_replicates: valid.len(),
        degenerate_draws,
    })
}
