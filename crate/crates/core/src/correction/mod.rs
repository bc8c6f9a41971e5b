//! Autocorrelation-aware correction of pooled turn-level tests.
//!
//! Stage 1 screens every metric-label pair with a pooled point-biserial test
//! under Benjamini-Hochberg control. Stage 2 re-tests each survivor with the
//! Chelton effective sample size and with a conversation-level block
//! bootstrap; a pair is robust only when both corrected p-values fall below
//! `alpha`.

pub mod bootstrap;
pub mod chelton;
mod dataset;
pub mod derive;
pub mod fdr;
pub mod permutation;
pub mod protocol;
pub mod seed;

use thiserror::Error;

use crate::stats::StatsError;

pub use bootstrap::{block_bootstrap_p, BootstrapOutcome};
pub use chelton::{chelton_neff, chelton_p, mean_lag1_rho, RhoOptions, RhoSummary, RhoWeighting};
pub use dataset::{ConversationRecord, LabelColumn, MetricColumn, StudyDataset};
pub use derive::{derive_metric, DeriveOp};
pub use fdr::{bh_fdr, FdrOutcome};
pub use permutation::{permutation_baseline, PermutationOutcome};
pub use protocol::{
    audit, confirm, inflation_rate, pooled_test, run_two_stage, screen, with_workers, AuditRow, FdrScope, PairResult, PairStatus,
    PooledTestResult, ProtocolReport, RobustStatus, RobustTestResult, RunConfig, ScreenEntry, ScreenReport,
    SkipReason, SkippedPair,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no conversation yields a lag-1 autocorrelation for metric `{0}`")]
    NoEligibleConversations(String),
    #[error("mean autocorrelation must satisfy |rho| < 1, got {0}")]
    InvalidRho(f64),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("effective sample size {0} leaves no degrees of freedom")]
    InsufficientNeff(f64),
    #[error("{degenerate} degenerate bootstrap draws exceed the budget of {budget}")]
    DegenerateReplicateBudget { degenerate: usize, budget: usize },
    #[error("label `{0}` has a single class across the whole dataset")]
    LabelMonoculture(String),
    #[error("resampling needs at least 2 conversations, got {0}")]
    TooFewConversations(usize),
    #[error("need at least {min} replicates, got {got}")]
    InvalidReplicates { got: usize, min: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("p-value must lie in (0, 1], got {0}")]
    InvalidPValue(f64),
    #[error("robust count {robust} exceeds pooled-significant count {pooled}")]
    CountInversion { pooled: usize, robust: usize },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("conversation `{0}` has no turns")]
    EmptyConversation(String),
    #[error("conversation `{0}` appears twice")]
    DuplicateConversation(String),
    #[error("conversation `{conversation}`: column `{column}` has {got} entries, expected {expected}")]
    ColumnLength { conversation: String, column: String, expected: usize, got: usize },
    #[error("conversation `{conversation}`: metric `{metric}` contains a non-finite value")]
    NonFiniteMetric { conversation: String, metric: String },
    #[error("configuration: {0}")]
    Config(String),
}
