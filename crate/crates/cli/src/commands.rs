use std::fmt;
use std::fs;
use std::path::Path;

use turnwise::correction::{
    audit, confirm, derive_metric, permutation_baseline, run_two_stage, screen, with_workers, AuditRow, DeriveOp,
    EngineError, ProtocolReport, RunConfig,
};
use turnwise::dataset_io::{
    format_reduction, load_study, parse_screen, save_calibration, save_permutation, save_report, save_screen,
    save_study, write_audit, Format, IoError, LoadedStudy,
};
use turnwise::synthetic::{
    build_synthetic_study, power_experiment, type1_experiment, CalibrationResult, Method, SyntheticError,
};
use turnwise::StatsError;

use crate::args::{Command, DataArgs, TransformOp};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or unusable input data.
    Input(String),
    /// Invalid flags or parameter combinations.
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Config(m) => f.write_str(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Engine(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_)
            | EngineError::InvalidReplicates { .. }
            | EngineError::InvalidLevel(_)
            | EngineError::Stats(StatsError::InvalidAlpha(_) | StatsError::InvalidLevel(_)) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SyntheticError> for CliError {
    fn from(e: SyntheticError) -> Self {
        match e {
            SyntheticError::Engine(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load(data: &DataArgs, min_conv_len: usize) -> Result<LoadedStudy<f64>> {
    let loaded = load_study(&data.data, &data.load_options(min_conv_len))?;
    if !loaded.report.is_clean() {
        eprint!("{}", loaded.report);
    }
    Ok(loaded)
}

fn validated(config: RunConfig) -> Result<RunConfig> {
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn print_audit(rows: &[AuditRow<f64>]) {
    println!("{:<24} {:>9} {:>9} {:>11} {:>10} {:>5}  high_risk", "metric", "rho_bar", "n", "n_eff", "reduction", "k");
    for row in rows {
        let rho = row.rho.map_or_else(|| "-".to_string(), |r| format!("{:.3}", r.rho_bar));
        let n_eff = row.n_eff.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        let red = row.reduction.map_or_else(|| "-".to_string(), format_reduction);
        let flag = if row.high_risk { "yes" } else { "no" };
        println!("{:<24} {:>9} {:>9} {:>11} {:>10} {:>5}  {flag}", row.metric, rho, row.n, n_eff, red, row.k);
    }
}

fn print_summary(report: &ProtocolReport<f64>, metrics: usize, labels: usize) {
    println!(
        "k = {} conversations, n = {} turns, {metrics} metric(s) x {labels} label(s)",
        report.k, report.total_turns
    );
    println!("pooled-significant: {}", report.n_pooled_sig);
    println!("robust: {}", report.n_robust);
    match report.inflation_rate {
        Some(ir) => println!("inflation rate: {ir:.4}"),
        None => println!("inflation rate: n/a"),
    }
}

fn finish_report(report: &ProtocolReport<f64>, loaded: &LoadedStudy<f64>, out_dir: &Path) -> Result<()> {
    let paths = save_report(report, out_dir)?;
    print_summary(report, loaded.dataset.metric_names().len(), loaded.dataset.label_names().len());
    println!("wrote {}, {}, {}", paths.results.display(), paths.audit.display(), paths.checklist.display());
    Ok(())
}

fn require_labels(loaded: &LoadedStudy<f64>) -> Result<()> {
    if loaded.dataset.metric_names().is_empty() {
        return Err(CliError::Input("dataset has no metric columns".into()));
    }
    if loaded.dataset.label_names().is_empty() {
        return Err(CliError::Input("dataset has no label columns (prefix them with `label:` or pass --labels)".into()));
    }
    Ok(())
}

fn print_calibration(result: &CalibrationResult) {
    let what = match result.kind {
        turnwise::synthetic::CalibrationKind::Type1 => "false-positive rate",
        turnwise::synthetic::CalibrationKind::Power => "power",
    };
    println!(
        "{what} (r_true = {}, reps = {}, alpha = {}, B = {})",
        result.r_true, result.reps, result.alpha, result.bootstrap_b
    );
    print!("{:>6}", "rho");
    for m in Method::ALL {
        print!("  {:>16}", m.name());
    }
    println!("  {:>8}", "mean_r");
    for level in &result.levels {
        print!("{:>6.2}", level.rho);
        for m in Method::ALL {
            let r = level.rate(m);
            print!("  {:>16}", format!("{:.3} ± {:.3}", r.rate, r.se));
        }
        println!("  {:>8.4}", level.mean_r);
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Audit { data, config, out_dir } => {
            let config = validated(config.to_config())?;
            let loaded = load(&data, config.min_conv_len)?;
            if loaded.dataset.metric_names().is_empty() {
                return Err(CliError::Input("dataset has no metric columns".into()));
            }
            let rows = with_workers(config.workers, || audit(&loaded.dataset, &config))?;
            print_audit(&rows);
            if let Some(dir) = out_dir {
                create_dir(&dir)?;
                let path = dir.join("audit.csv");
                let file = fs::File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                write_audit(&rows, file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Run { data, config, out_dir } => {
            let config = validated(config.to_config())?;
            let loaded = load(&data, config.min_conv_len)?;
            require_labels(&loaded)?;
            let report = run_two_stage(&loaded.dataset, &config)?;
            finish_report(&report, &loaded, &out_dir)?;
        }
        Command::Screen { data, config, out_dir } => {
            let config = validated(config.to_config())?;
            let loaded = load(&data, config.min_conv_len)?;
            require_labels(&loaded)?;
            let s = with_workers(config.workers, || screen(&loaded.dataset, &config))??;
            create_dir(&out_dir)?;
            let path = out_dir.join("screen.csv");
            save_screen(&s, &path)?;
            println!("tested pairs: {}", s.entries.len());
            println!("pooled-significant: {}", s.n_pooled_sig());
            println!("wrote {}", path.display());
        }
        Command::Confirm { data, config, screen: screen_path, out_dir } => {
            let config = validated(config.to_config())?;
            let loaded = load(&data, config.min_conv_len)?;
            require_labels(&loaded)?;
            let text = fs::read_to_string(&screen_path)
                .map_err(|e| CliError::Input(format!("{}: {e}", screen_path.display())))?;
            let s = parse_screen::<f64>(&text)?;
            for entry in &s.entries {
                if !loaded.dataset.has_metric(entry.metric()) || !loaded.dataset.has_label(entry.label()) {
                    return Err(CliError::Input(format!(
                        "screen pair ({}, {}) is not in the dataset",
                        entry.metric(),
                        entry.label()
                    )));
                }
            }
            let report = with_workers(config.workers, || confirm(&loaded.dataset, &s, &config))??;
            finish_report(&report, &loaded, &out_dir)?;
        }
        Command::Calibrate { spec, config, reps, out_dir } => {
            let config = validated(config.to_config())?;
            let mut null_spec = spec.to_spec(config.seed);
            null_spec.r_true = 0.0;
            if !null_spec.rho_levels.contains(&0.0) {
                null_spec.rho_levels.insert(0, 0.0);
                null_spec.n_conversations = null_spec.rho_levels.len() * null_spec.conversations_per_level;
            }
            let effect_spec = spec.to_spec(config.seed);
            effect_spec.validate()?;
            let type1 = type1_experiment(&null_spec, reps, &config)?;
            print_calibration(&type1);
            let power = if effect_spec.r_true != 0.0 {
                println!();
                let p = power_experiment(&effect_spec, reps, &config)?;
                print_calibration(&p);
                Some(p)
            } else {
                None
            };
            if let Some(dir) = out_dir {
                create_dir(&dir)?;
                let path = dir.join("calibration.csv");
                let mut all = vec![&type1];
                all.extend(power.as_ref());
                save_calibration(&all, &path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Permute { data, metric, label, permutations, seed, alpha, min_conv_len, out_dir } => {
            if permutations < 100 {
                return Err(CliError::Config(format!("need at least 100 permutations, got {permutations}")));
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let loaded = load(&data, min_conv_len)?;
            let out = permutation_baseline(&loaded.dataset, &metric, &label, permutations, seed, alpha)?;
            println!("pair: {metric} x {label}");
            println!("conversations tested: {}", out.conversations_tested);
            println!("observed significant conversations: {}", out.observed);
            println!("null mean ± sd: {:.3} ± {:.3}", out.null_mean, out.null_sd);
            println!("null 95th / 97.5th percentile: {} / {}", out.null_quantile(0.95), out.null_quantile(0.975));
            println!("p_meta: {}", out.p_meta);
            if let Some(dir) = out_dir {
                create_dir(&dir)?;
                let path = dir.join("permutation.csv");
                save_permutation(&out, &path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Transform { data, metric, op, alpha, output, min_conv_len } => {
            let op = match (op, alpha) {
                (TransformOp::Ewma, Some(a)) => DeriveOp::Ewma(a),
                (TransformOp::Ewma, None) => return Err(CliError::Config("--op ewma needs --alpha".into())),
                (TransformOp::Diff, None) => DeriveOp::Diff,
                (TransformOp::Diff, Some(_)) => return Err(CliError::Config("--alpha applies to --op ewma only".into())),
            };
            if let DeriveOp::Ewma(a) = op {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(CliError::Config(format!("EWMA alpha must lie in (0, 1], got {a}")));
                }
            }
            let loaded = load(&data, min_conv_len)?;
            let (dataset, name) = derive_metric(&loaded.dataset, &metric, op)?;
            save_study(&dataset, &output, Format::from_path(&output))?;
            println!("added metric {name}");
            println!("wrote {}", output.display());
        }
        Command::Synth { spec, seed, output } => {
            let dataset = build_synthetic_study(&spec.to_spec(seed))?;
            save_study(&dataset, &output, Format::from_path(&output))?;
            println!("k = {} conversations, n = {} turns, metrics: {}", dataset.k(), dataset.total_turns(), dataset.metric_names().join(", "));
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}
