//! Autocorrelation-aware inference for turn-level conversation metrics.
//!
//! The numerical core is generic over the scalar type through [`Scalar`];
//! aliases such as [`StudyDataset64`] fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correction;
pub mod dataset_io;
pub mod scalar;
pub mod stats;
pub mod synthetic;

pub use correction::EngineError;
pub use scalar::Scalar;
pub use stats::StatsError;

pub type Series64 = stats::Series<f64>;
pub type Series32 = stats::Series<f32>;
pub type ConversationRecord64 = correction::ConversationRecord<f64>;
pub type StudyDataset64 = correction::StudyDataset<f64>;
pub type StudyDataset32 = correction::StudyDataset<f32>;
pub type PooledTestResult64 = correction::PooledTestResult<f64>;
pub type RobustTestResult64 = correction::RobustTestResult<f64>;
pub type ProtocolReport64 = correction::ProtocolReport<f64>;
pub type ProtocolReport32 = correction::ProtocolReport<f32>;
