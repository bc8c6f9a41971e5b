use crate::scalar::Scalar;

use super::EngineError;

#[derive(Debug, Clone, PartialEq)]
pub struct FdrOutcome<T> {
    pub rejected: Vec<bool>,
    /// BH-adjusted p-values, in input order.
    pub q_values: Vec<T>,
}

/// Benjamini-Hochberg step-up procedure at level `q`.
///
/// Adjusted values are `min_{j ≥ i} m·p_(j)/j`, capped at 1, so tied
/// p-values share the adjustment of the largest rank in the tie. A
/// hypothesis is rejected iff its adjusted value is at most `q`.
pub fn bh_fdr<T: Scalar>(p_values: &[T], q: T) -> Result<FdrOutcome<T>, EngineError> {
    if p_values.is_empty() {
        return Err(EngineError::EmptyInput);
    }
    if !(q > T::zero() && q < T::one()) {
        return Err(EngineError::InvalidLevel(q.to_f64_lossy()));
    }
    if let Some(&bad) = p_values.iter().find(|&&p| !(p > T::zero() && p <= T::one())) {
        return Err(EngineError::InvalidPValue(bad.to_f64_lossy()));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("finite p-values"));

    let mf = T::count(m);
    let mut q_values = vec![T::one(); m];
    let mut running = T::one();
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        let adjusted = (mf * p_values[idx] / T::count(rank)).min(T::one());
        running = running.min(adjusted);
        q_values[idx] = running;
    }
    let rejected = q_values.iter().map(|&v| v <= q).collect();
    Ok(FdrOutcome { rejected, q_values })
}
