use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::correction::{
    AuditRow, FdrScope, PairResult, PermutationOutcome, PooledTestResult, ProtocolReport, ScreenEntry, ScreenReport,
    SkipReason,
};
use crate::scalar::Scalar;
use crate::stats::RhoEstimator;
use crate::synthetic::CalibrationResult;

use super::IoError;

/// Results table columns: the core report columns first, extras after.
pub const RESULTS_COLUMNS: [&str; 18] = [
    "metric",
    "label",
    "r_obs",
    "p_pooled",
    "rho_bar",
    "n_eff",
    "p_final",
    "status",
    "q_value",
    "p_chelton",
    "p_boot",
    "bootstrap_B",
    "n",
    "t",
    "pooled_significant",
    "rho_conversations",
    "neff_collapsed",
    "bootstrap_valid",
];

pub const AUDIT_COLUMNS: [&str; 9] =
    ["metric", "rho_bar", "n", "n_eff", "reduction", "reduction_display", "k", "rho_conversations", "high_risk"];

pub const SCREEN_COLUMNS: [&str; 9] =
    ["metric", "label", "r_obs", "n", "t", "p_pooled", "q_value", "pooled_significant", "status"];

const TESTED: &str = "TESTED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub results: PathBuf,
    pub audit: PathBuf,
    pub checklist: PathBuf,
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn num<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reduction factor as printed in audit tables: one decimal below 2, whole
/// numbers above, e.g. `1.1×`, `27×`.
pub fn format_reduction(factor: f64) -> String {
    if factor < 2.0 {
        format!("{factor:.1}×")
    } else {
        format!("{}×", factor.round())
    }
}

pub fn write_results<T: Scalar, W: Write>(report: &ProtocolReport<T>, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_COLUMNS).map_err(csv_err)?;
    for result in &report.results {
        let pooled = result.pooled();
        let robust = result.robust();
        let (rho_bar, n_eff) = match result {
            PairResult::Confirmed(r) => (Some(r.rho_bar), Some(r.n_eff)),
            PairResult::Skipped(s) => (s.rho_bar, s.n_eff),
        };
        let record = [
            result.metric().to_string(),
            result.label().to_string(),
            num(pooled.map(|p| p.r_obs)),
            num(pooled.map(|p| p.p_pooled)),
            num(rho_bar),
            num(n_eff),
            num(robust.map(|r| r.p_final)),
            result.status().to_string(),
            num(pooled.map(|p| p.q_value)),
            num(robust.map(|r| r.p_chelton)),
            num(robust.map(|r| r.p_boot)),
            robust.map(|r| r.bootstrap_b.to_string()).unwrap_or_default(),
            pooled.map(|p| p.n.to_string()).unwrap_or_default(),
            num(pooled.map(|p| p.t)),
            pooled.map(|p| p.pooled_significant.to_string()).unwrap_or_default(),
            robust.map(|r| r.rho_conversation_count.to_string()).unwrap_or_default(),
            robust.map(|r| r.neff_collapsed.to_string()).unwrap_or_default(),
            robust.map(|r| r.bootstrap_valid.to_string()).unwrap_or_default(),
        ];
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_audit<T: Scalar, W: Write>(rows: &[AuditRow<T>], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_COLUMNS).map_err(csv_err)?;
    for row in rows {
        let record = [
            row.metric.clone(),
            num(row.rho.map(|r| r.rho_bar)),
            row.n.to_string(),
            num(row.n_eff),
            num(row.reduction),
            row.reduction.map(|r| format_reduction(r.to_f64_lossy())).unwrap_or_default(),
            row.k.to_string(),
            row.rho.map(|r| r.used_conversations.to_string()).unwrap_or_default(),
            row.high_risk.to_string(),
        ];
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()
}

fn scope_name(scope: FdrScope) -> &'static str {
    match scope {
        FdrScope::Joint => "joint",
        FdrScope::PerLabel => "per-label",
    }
}

fn estimator_name(estimator: RhoEstimator) -> &'static str {
    match estimator {
        RhoEstimator::LaggedPearson => "lagged-pearson",
        RhoEstimator::Acf => "acf",
    }
}

/// Plain-text checklist with the five reporting items filled in.
pub fn write_checklist<T: Scalar, W: Write>(report: &ProtocolReport<T>, mut out: W) -> std::io::Result<()> {
    let c = &report.config;
    writeln!(out, "turn-level reporting checklist")?;
    writeln!(out, "k = {} conversations, n = {} turns", report.k, report.total_turns)?;
    writeln!(
        out,
        "alpha = {}, q = {}, bootstrap_B = {}, seed = {}, fdr_scope = {}, rho_estimator = {}, min_conv_len = {}",
        c.alpha,
        c.q,
        c.bootstrap_b,
        c.seed,
        scope_name(c.fdr_scope),
        estimator_name(c.rho_estimator),
        c.min_conv_len
    )?;
    writeln!(out)?;

    let high: Vec<&str> = report.audit.iter().filter(|a| a.high_risk).map(|a| a.metric.as_str()).collect();
    let no_rho: Vec<&str> = report.audit.iter().filter(|a| a.rho.is_none()).map(|a| a.metric.as_str()).collect();
    let list = |v: &[&str]| if v.is_empty() { "none".to_string() } else { v.join(", ") };
    write!(out, "[x] 1. autocorrelation audit: {} metric(s) audited; high-risk (rho_bar > 0.5): {}", report.audit.len(), list(&high))?;
    if !no_rho.is_empty() {
        write!(out, "; rho not computable: {}", list(&no_rho))?;
    }
    writeln!(out)?;

    let worst = report
        .audit
        .iter()
        .filter_map(|a| a.reduction.map(|r| (r.to_f64_lossy(), a.metric.as_str())))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match worst {
        Some((r, m)) => writeln!(
            out,
            "[x] 2. effective sample size: n_eff is listed next to nominal n in audit.csv; largest reduction {} ({m})",
            format_reduction(r)
        )?,
        None => writeln!(out, "[ ] 2. effective sample size: no metric had a computable n_eff")?,
    }

    writeln!(
        out,
        "[x] 3. cluster-aware inference: Chelton correction and conversation block bootstrap (B = {}) on {} pooled-significant pair(s); pooled p-values are exploratory",
        c.bootstrap_b, report.n_pooled_sig
    )?;

    match report.inflation_rate {
        Some(ir) => writeln!(
            out,
            "[x] 4. inflation rate: {:.4} ({} of {} pooled-significant pair(s) not robust)",
            ir.to_f64_lossy(),
            report.n_pooled_sig - report.n_robust,
            report.n_pooled_sig
        )?,
        None => writeln!(out, "[x] 4. inflation rate: n/a (no pooled-significant pairs)")?,
    }

    if high.is_empty() {
        writeln!(out, "[x] 5. metric design check: no metric has rho_bar > 0.5")?;
    } else {
        writeln!(
            out,
            "[ ] 5. metric design check: check {} against conversation-level aggregates and consider first differences",
            list(&high)
        )?;
    }
    writeln!(out)?;
    writeln!(out, "pooled-significant: {}", report.n_pooled_sig)?;
    writeln!(out, "robust: {}", report.n_robust)?;
    match report.inflation_rate {
        Some(ir) => writeln!(out, "inflation rate: {}", ir.to_f64_lossy()),
        None => writeln!(out, "inflation rate: n/a"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|e| IoError::io(path, e))
}

/// Writes `results.csv`, `audit.csv` and `checklist.txt` into `out_dir`.
pub fn save_report<T: Scalar>(report: &ProtocolReport<T>, out_dir: &Path) -> Result<ReportPaths, IoError> {
    fs::create_dir_all(out_dir).map_err(|e| IoError::io(out_dir, e))?;
    let paths = ReportPaths {
        results: out_dir.join("results.csv"),
        audit: out_dir.join("audit.csv"),
        checklist: out_dir.join("checklist.txt"),
    };
    write_results(report, create(&paths.results)?).map_err(|e| IoError::io(&paths.results, e))?;
    write_audit(&report.audit, create(&paths.audit)?).map_err(|e| IoError::io(&paths.audit, e))?;
    write_checklist(report, create(&paths.checklist)?).map_err(|e| IoError::io(&paths.checklist, e))?;
    Ok(paths)
}

pub fn write_screen<T: Scalar, W: Write>(screen: &ScreenReport<T>, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCREEN_COLUMNS).map_err(csv_err)?;
    for entry in &screen.entries {
        let record = match entry {
            ScreenEntry::Tested(p) => [
                p.metric.clone(),
                p.label.clone(),
                p.r_obs.to_string(),
                p.n.to_string(),
                p.t.to_string(),
                p.p_pooled.to_string(),
                p.q_value.to_string(),
                p.pooled_significant.to_string(),
                TESTED.to_string(),
            ],
            ScreenEntry::Skipped { metric, label, reason } => [
                metric.clone(),
                label.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("SKIPPED({})", reason.code()),
            ],
        };
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()
}

pub fn save_screen<T: Scalar>(screen: &ScreenReport<T>, path: &Path) -> Result<(), IoError> {
    write_screen(screen, create(path)?).map_err(|e| IoError::io(path, e))
}

/// Reads a screen table written by [`write_screen`].
pub fn parse_screen<T: Scalar>(text: &str) -> Result<ScreenReport<T>, IoError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::Parse { row: 1, column: String::new(), message: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != SCREEN_COLUMNS {
        return Err(IoError::Schema(format!("screen header must be {}", SCREEN_COLUMNS.join(","))));
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Parse {
            row: e.position().map_or(0, |p| p.line()),
            column: String::new(),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |i: usize, what: &str| IoError::Parse {
            row,
            column: SCREEN_COLUMNS[i].to_string(),
            message: format!("`{}` is not {what}", field(i)),
        };
        let real = |i: usize| T::from_str_radix(field(i), 10).map_err(|_| bad(i, "a number"));
        let status = field(8);
        if status == TESTED {
            entries.push(ScreenEntry::Tested(PooledTestResult {
                metric: field(0).to_string(),
                label: field(1).to_string(),
                r_obs: real(2)?,
                n: field(3).parse().map_err(|_| bad(3, "an integer"))?,
                t: real(4)?,
                p_pooled: real(5)?,
                q_value: real(6)?,
                pooled_significant: field(7).parse().map_err(|_| bad(7, "true or false"))?,
            }));
        } else {
            let reason = status
                .strip_prefix("SKIPPED(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(SkipReason::from_code)
                .ok_or_else(|| bad(8, "TESTED or SKIPPED(reason)"))?;
            entries.push(ScreenEntry::Skipped { metric: field(0).to_string(), label: field(1).to_string(), reason });
        }
    }
    Ok(ScreenReport { entries })
}

pub fn write_calibration<W: Write>(results: &[&CalibrationResult], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "rho", "metric", "method", "rejections", "completed", "rate", "se", "mean_r", "mean_rho_bar"])
        .map_err(csv_err)?;
    for result in results {
        let kind = match result.kind {
            crate::synthetic::CalibrationKind::Type1 => "type1",
            crate::synthetic::CalibrationKind::Power => "power",
        };
        for level in &result.levels {
            for rate in &level.rates {
                w.write_record([
                    kind.to_string(),
                    level.rho.to_string(),
                    level.metric.clone(),
                    rate.method.to_string(),
                    rate.rejections.to_string(),
                    level.completed.to_string(),
                    rate.rate.to_string(),
                    rate.se.to_string(),
                    level.mean_r.to_string(),
                    level.mean_rho_bar.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()
}

pub fn save_calibration(results: &[&CalibrationResult], path: &Path) -> Result<(), IoError> {
    write_calibration(results, create(path)?).map_err(|e| IoError::io(path, e))
}

/// Null distribution of a permutation baseline, one row per replicate.
pub fn save_permutation<T: Scalar>(outcome: &PermutationOutcome<T>, path: &Path) -> Result<(), IoError> {
    let write = |out: BufWriter<File>| -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "null_count"]).map_err(csv_err)?;
        for (i, c) in outcome.null_counts.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()]).map_err(csv_err)?;
        }
        w.flush()
    };
    write(create(path)?).map_err(|e| IoError::io(path, e))
}
