use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn turnwise(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnwise")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--output", "s.csv", "--conversations-per-level", "12", "--max-length", "120"];
    args.extend_from_slice(extra);
    let out = turnwise(&args, dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_lists_flags_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnwise(&["run", "--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for flag in ["--alpha", "--q", "--bootstrap_B", "--seed", "--fdr_scope", "--rho_estimator", "--min_conv_len", "--workers"] {
        assert!(text.contains(flag), "missing {flag}");
    }
    assert!(text.contains("[default: 2000]"));
    assert!(text.contains("[default: joint]"));
}

#[test]
fn unknown_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(turnwise(&["run", "x.csv", "--bogus"], dir.path()).status.code(), Some(3));
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnwise(&["run", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_bootstrap_and_rep_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    assert_eq!(turnwise(&["run", "s.csv", "--bootstrap_B", "50"], dir.path()).status.code(), Some(3));
    assert_eq!(turnwise(&["calibrate", "--reps", "50"], dir.path()).status.code(), Some(3));
    assert_eq!(turnwise(&["permute", "s.csv", "--metric", "ar0.10", "--label", "y", "--B", "20"], dir.path()).status.code(), Some(3));
}

#[test]
fn run_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let a = turnwise(&["run", "s.csv", "--bootstrap_B", "200", "--out-dir", "a", "--workers", "1"], dir.path());
    let b = turnwise(&["run", "s.csv", "--bootstrap_B", "200", "--out-dir", "b", "--workers", "3"], dir.path());
    assert!(a.status.success());
    assert!(b.status.success());
    assert!(stdout(&a).contains("pooled-significant:"));
    for file in ["results.csv", "audit.csv", "checklist.txt"] {
        let x = fs::read_to_string(dir.path().join("a").join(file)).unwrap();
        let y = fs::read_to_string(dir.path().join("b").join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let results = fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 5);
}

#[test]
fn null_study_reports_inflation_as_na() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--rho-levels", "0.9", "--r-true", "0", "--null-label-persistence", "0", "--seed", "3"]);
    let out = turnwise(&["run", "s.csv", "--bootstrap_B", "100", "--out-dir", "o"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("pooled-significant: 0"), "{text}");
    assert!(text.contains("inflation rate: n/a"));
}

#[test]
fn screen_then_confirm_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    assert!(turnwise(&["screen", "s.csv", "--out-dir", "sc"], dir.path()).status.success());
    let c = turnwise(&["confirm", "s.csv", "--screen", "sc/screen.csv", "--bootstrap_B", "200", "--out-dir", "c"], dir.path());
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert!(turnwise(&["run", "s.csv", "--bootstrap_B", "200", "--out-dir", "r"], dir.path()).status.success());
    let x = fs::read_to_string(dir.path().join("c/results.csv")).unwrap();
    let y = fs::read_to_string(dir.path().join("r/results.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn transform_appends_column() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = turnwise(&["transform", "s.csv", "--metric", "ar0.30", "--op", "ewma", "--alpha", "0.3", "--output", "t.tsv"], dir.path());
    assert!(out.status.success());
    let header = fs::read_to_string(dir.path().join("t.tsv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.split('\t').any(|c| c == "ar0.30.ewma0.3"));
    let audit = stdout(&turnwise(&["audit", "t.tsv"], dir.path()));
    assert!(audit.contains("ar0.30.ewma0.3"));
}

#[test]
fn transform_rejects_bad_alpha() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    for alpha in ["0", "1.5"] {
        let out = turnwise(&["transform", "s.csv", "--metric", "ar0.30", "--op", "ewma", "--alpha", alpha, "--output", "t.csv"], dir.path());
        assert_eq!(out.status.code(), Some(3));
    }
    let out = turnwise(&["transform", "s.csv", "--metric", "ar0.30", "--op", "ewma", "--output", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_metric_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = turnwise(&["permute", "s.csv", "--metric", "nope", "--label", "y", "--B", "100"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_flags_high_risk_metrics() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = turnwise(&["audit", "s.csv"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("ar0.90")).unwrap();
    assert!(row.ends_with("yes"));
    let row = text.lines().find(|l| l.starts_with("ar0.10")).unwrap();
    assert!(row.ends_with("no"));
}

#[test]
fn infeasible_effect_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnwise(&["synth", "--output", "s.csv", "--r-true", "0.95"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
