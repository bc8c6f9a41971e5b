use std::collections::{BTreeMap, BTreeSet};

use crate::scalar::Scalar;

use super::EngineError;

/// A metric column; `None` marks a missing turn.
pub type MetricColumn<T> = Vec<Option<T>>;
/// A label column; `None` marks a missing annotation.
pub type LabelColumn = Vec<Option<bool>>;

/// One conversation in original turn order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationRecord<T> {
    conversation_id: String,
    turn_count: usize,
    metrics: BTreeMap<String, MetricColumn<T>>,
    labels: BTreeMap<String, LabelColumn>,
}

impl<T: Scalar> ConversationRecord<T> {
    /// Every column must have exactly `turn_count` entries.
    pub fn new(
        conversation_id: impl Into<String>,
        turn_count: usize,
        metrics: BTreeMap<String, MetricColumn<T>>,
        labels: BTreeMap<String, LabelColumn>,
    ) -> Result<Self, EngineError> {
        let conversation_id = conversation_id.into();
        if turn_count == 0 {
            return Err(EngineError::EmptyConversation(conversation_id));
        }
        let bad = metrics
            .iter()
            .map(|(k, v)| (k, v.len()))
            .chain(labels.iter().map(|(k, v)| (k, v.len())))
            .find(|&(_, len)| len != turn_count);
        if let Some((column, len)) = bad {
            return Err(EngineError::ColumnLength {
                conversation: conversation_id,
                column: column.clone(),
                expected: turn_count,
                got: len,
            });
        }
        for (name, col) in &metrics {
            if col.iter().flatten().any(|v| !v.is_finite()) {
                return Err(EngineError::NonFiniteMetric { conversation: conversation_id, metric: name.clone() });
            }
        }
        Ok(Self { conversation_id, turn_count, metrics, labels })
    }

    /// Convenience constructor for fully observed columns.
    pub fn complete(
        conversation_id: impl Into<String>,
        metrics: Vec<(String, Vec<T>)>,
        labels: Vec<(String, Vec<bool>)>,
    ) -> Result<Self, EngineError> {
        let turn_count = metrics
            .first()
            .map(|(_, v)| v.len())
            .or_else(|| labels.first().map(|(_, v)| v.len()))
            .unwrap_or(0);
        let metrics = metrics.into_iter().map(|(k, v)| (k, v.into_iter().map(Some).collect())).collect();
        let labels = labels.into_iter().map(|(k, v)| (k, v.into_iter().map(Some).collect())).collect();
        Self::new(conversation_id, turn_count, metrics, labels)
    }

    pub fn id(&self) -> &str {
        &self.conversation_id
    }

    pub fn turn_count(&self) -> usize {
        self.turn_count
    }

    pub fn metric(&self, name: &str) -> Option<&[Option<T>]> {
        self.metrics.get(name).map(Vec::as_slice)
    }

    pub fn label(&self, name: &str) -> Option<&[Option<bool>]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    pub fn metrics(&self) -> &BTreeMap<String, MetricColumn<T>> {
        &self.metrics
    }

    pub fn labels(&self) -> &BTreeMap<String, LabelColumn> {
        &self.labels
    }

    /// Adds or replaces a metric column.
    pub fn set_metric(&mut self, name: impl Into<String>, column: MetricColumn<T>) -> Result<(), EngineError> {
        let name = name.into();
        if column.len() != self.turn_count {
            return Err(EngineError::ColumnLength {
                conversation: self.conversation_id.clone(),
                column: name,
                expected: self.turn_count,
                got: column.len(),
            });
        }
        self.metrics.insert(name, column);
        Ok(())
    }

    /// Turns where both the metric and the label are observed, in order.
    pub fn paired(&self, metric: &str, label: &str) -> (Vec<T>, Vec<bool>) {
        let (Some(m), Some(l)) = (self.metrics.get(metric), self.labels.get(label)) else {
            return (Vec::new(), Vec::new());
        };
        m.iter()
            .zip(l)
            .filter_map(|(&v, &lab)| Some((v?, lab?)))
            .unzip()
    }

    /// Observed metric values in order, gaps removed.
    pub fn observed(&self, metric: &str) -> Vec<T> {
        self.metrics.get(metric).map(|m| m.iter().flatten().copied().collect()).unwrap_or_default()
    }

    /// Longest run of consecutive observed metric values.
    pub fn longest_run(&self, metric: &str) -> Vec<T> {
        let Some(col) = self.metrics.get(metric) else {
            return Vec::new();
        };
        let mut best: &[Option<T>] = &[];
        for run in col.split(Option::is_none) {
            if run.len() > best.len() {
                best = run;
            }
        }
        best.iter().flatten().copied().collect()
    }
}

/// `k` conversations plus the union of their metric and label names.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset<T> {
    conversations: Vec<ConversationRecord<T>>,
    metric_names: Vec<String>,
    label_names: Vec<String>,
}

impl<T: Scalar> StudyDataset<T> {
    pub fn new(conversations: Vec<ConversationRecord<T>>) -> Result<Self, EngineError> {
        let mut seen = BTreeSet::new();
        for c in &conversations {
            if !seen.insert(c.id()) {
                return Err(EngineError::DuplicateConversation(c.id().to_string()));
            }
        }
        let mut metric_names = Vec::new();
        let mut label_names = Vec::new();
        for c in &conversations {
            for name in c.metrics.keys() {
                if !metric_names.contains(name) {
                    metric_names.push(name.clone());
                }
            }
            for name in c.labels.keys() {
                if !label_names.contains(name) {
                    label_names.push(name.clone());
                }
            }
        }
        metric_names.sort();
        label_names.sort();
        Ok(Self { conversations, metric_names, label_names })
    }

    pub fn conversations(&self) -> &[ConversationRecord<T>] {
        &self.conversations
    }

    pub fn conversations_mut(&mut self) -> &mut [ConversationRecord<T>] {
        &mut self.conversations
    }

    /// Number of conversations.
    pub fn k(&self) -> usize {
        self.conversations.len()
    }

    /// Pooled turn count `Σ n_j`.
    pub fn total_turns(&self) -> usize {
        self.conversations.iter().map(ConversationRecord::turn_count).sum()
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn has_metric(&self, name: &str) -> bool {
        self.metric_names.iter().any(|m| m == name)
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.label_names.iter().any(|l| l == name)
    }

    pub(crate) fn require_pair(&self, metric: &str, label: &str) -> Result<(), EngineError> {
        if !self.has_metric(metric) {
            return Err(EngineError::UnknownMetric(metric.to_string()));
        }
        if !self.has_label(label) {
            return Err(EngineError::UnknownLabel(label.to_string()));
        }
        Ok(())
    }

    /// All observed (metric, label) pairs concatenated across conversations.
    pub fn pooled(&self, metric: &str, label: &str) -> (Vec<T>, Vec<bool>) {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for c in &self.conversations {
            let (v, l) = c.paired(metric, label);
            values.extend(v);
            labels.extend(l);
        }
        (values, labels)
    }

    /// Number of observed values of `metric` across all conversations.
    pub fn observed_count(&self, metric: &str) -> usize {
        self.conversations
            .iter()
            .filter_map(|c| c.metric(metric))
            .map(|col| col.iter().filter(|v| v.is_some()).count())
            .sum()
    }

    /// Restricts the dataset to the given metrics and labels.
    pub fn select(&self, metrics: &[&str], labels: &[&str]) -> Result<Self, EngineError> {
        let conversations = self
            .conversations
            .iter()
            .map(|c| {
                let m = c
                    .metrics
                    .iter()
                    .filter(|(k, _)| metrics.contains(&k.as_str()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let l = c
                    .labels
                    .iter()
                    .filter(|(k, _)| labels.contains(&k.as_str()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                ConversationRecord::new(c.conversation_id.clone(), c.turn_count, m, l)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(conversations)
    }

    /// Re-derives the metric and label registries after columns were added.
    pub fn refresh_registries(&mut self) {
        let conversations = std::mem::take(&mut self.conversations);
        *self = Self::new(conversations).expect("ids were unique before");
    }
}
