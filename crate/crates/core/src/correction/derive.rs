//! Derived metric columns: EWMA smoothing and first differences.
//!
//! A derived column is an ordinary metric. It is audited for its own ρ̄ and
//! gets its own `n_eff`; nothing is carried over from the source column.

use crate::scalar::Scalar;
use crate::stats::{ewma, StatsError};

use super::{EngineError, MetricColumn, StudyDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeriveOp {
    /// Exponential smoothing with factor `alpha` in (0, 1].
    Ewma(f64),
    /// `x_t − x_{t−1}`; the first turn of each conversation has no value.
    Diff,
}

impl DeriveOp {
    /// Name of the derived column, `<metric>.ewma<alpha>` or `<metric>.diff`.
    pub fn column_name(self, metric: &str) -> String {
        match self {
            DeriveOp::Ewma(alpha) => format!("{metric}.ewma{alpha}"),
            DeriveOp::Diff => format!("{metric}.diff"),
        }
    }
}

fn ewma_column<T: Scalar>(col: &[Option<T>], alpha: T) -> Result<MetricColumn<T>, StatsError> {
    let mut out = vec![None; col.len()];
    let mut start = 0;
    while start < col.len() {
        if col[start].is_none() {
            start += 1;
            continue;
        }
        let end = col[start..].iter().position(Option::is_none).map_or(col.len(), |p| start + p);
        let run: Vec<T> = col[start..end].iter().map(|v| v.expect("run is observed")).collect();
        for (slot, v) in out[start..end].iter_mut().zip(ewma(&run, alpha)?) {
            *slot = Some(v);
        }
        start = end;
    }
    Ok(out)
}

fn diff_column<T: Scalar>(col: &[Option<T>]) -> MetricColumn<T> {
    let mut out = vec![None; col.len()];
    for t in 1..col.len() {
        if let (Some(a), Some(b)) = (col[t - 1], col[t]) {
            out[t] = Some(b - a);
        }
    }
    out
}

/// Returns a copy of `dataset` with the derived column appended, and its name.
///
/// Each conversation is transformed on its own. EWMA restarts after a missing
/// turn; differencing leaves the first turn (and any turn next to a gap)
/// empty, so labels stay aligned by turn index.
pub fn derive_metric<T: Scalar>(
    dataset: &StudyDataset<T>,
    metric: &str,
    op: DeriveOp,
) -> Result<(StudyDataset<T>, String), EngineError> {
    if !dataset.has_metric(metric) {
        return Err(EngineError::UnknownMetric(metric.to_string()));
    }
    if let DeriveOp::Ewma(alpha) = op {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(StatsError::InvalidAlpha(alpha).into());
        }
    }
    let name = op.column_name(metric);
    if dataset.has_metric(&name) {
        return Err(EngineError::Config(format!("metric `{name}` already exists")));
    }
    let mut out = dataset.clone();
    for conv in out.conversations_mut() {
        let Some(col) = conv.metric(metric) else {
            continue;
        };
        let derived = match op {
            DeriveOp::Ewma(alpha) => ewma_column(col, T::lit(alpha))?,
            DeriveOp::Diff => diff_column(col),
        };
        if derived.iter().any(Option::is_some) {
            conv.set_metric(name.clone(), derived)?;
        }
    }
    out.refresh_registries();
    Ok((out, name))
}
