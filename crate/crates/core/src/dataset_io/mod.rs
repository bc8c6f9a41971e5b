//! Long-form turn tables in and out, plus the report files.
//!
//! Input has one row per turn with a conversation id column, a turn index
//! column, metric columns and label columns. Label columns are named with a
//! `label:` prefix or declared in [`LoadOptions::labels`]; every other column
//! is a metric, even when its values happen to be 0 and 1.

mod load;
mod report;
mod save;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::correction::EngineError;

pub use load::{load_study, load_study_from_str, GapEntry, LoadedStudy, MissingEntry, NonFiniteEntry, ValidationReport};
pub use report::{
    format_reduction, parse_screen, save_calibration, save_permutation, save_report, save_screen, write_audit,
    write_calibration, write_checklist, write_results, write_screen, ReportPaths, AUDIT_COLUMNS, RESULTS_COLUMNS,
    SCREEN_COLUMNS,
};
pub use save::{save_study, write_study};

/// Prefix that marks a label column in a header.
pub const LABEL_PREFIX: &str = "label:";
pub const DEFAULT_ID_COLUMN: &str = "conversation_id";
pub const DEFAULT_TURN_COLUMN: &str = "turn_index";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse { row: u64, column: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}: label column `{column}` has non-binary value `{value}`")]
    NonBinaryLabel { row: u64, column: String, value: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Delimited { delimiter: u8 },
    JsonLines,
}

impl Format {
    pub const CSV: Format = Format::Delimited { delimiter: b',' };
    pub const TSV: Format = Format::Delimited { delimiter: b'\t' };

    /// `.jsonl`/`.ndjson` are JSON lines, `.tsv` is tab-delimited, anything
    /// else is comma-delimited.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "ndjson") => Format::JsonLines,
            Some("tsv" | "tab") => Format::TSV,
            _ => Format::CSV,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub format: Format,
    pub id_column: String,
    pub turn_column: String,
    /// Columns to treat as labels in addition to `label:`-prefixed ones.
    pub labels: Vec<String>,
    /// Conversations shorter than this are listed in the validation report.
    pub min_conv_len: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            format: Format::CSV,
            id_column: DEFAULT_ID_COLUMN.into(),
            turn_column: DEFAULT_TURN_COLUMN.into(),
            labels: Vec::new(),
            min_conv_len: 5,
        }
    }
}

impl LoadOptions {
    pub fn for_path(path: &Path) -> Self {
        Self { format: Format::from_path(path), ..Self::default() }
    }
}
