use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use turnwise::correction::{FdrScope, RhoWeighting, RunConfig};
use turnwise::dataset_io::{Format, LoadOptions, DEFAULT_ID_COLUMN, DEFAULT_TURN_COLUMN};
use turnwise::stats::RhoEstimator;
use turnwise::synthetic::SyntheticSpec;

#[derive(Debug, Parser)]
#[command(name = "turnwise", version, about = "Autocorrelation-aware inference for turn-level conversation metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lag-1 autocorrelation, n_eff and reduction factor per metric.
    Audit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write audit.csv into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Full two-stage protocol: pooled screen, then Chelton and bootstrap confirmation.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "turnwise_out")]
        out_dir: PathBuf,
    },
    /// Stage 1 only: pooled tests with BH-FDR, written to screen.csv.
    Screen {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "turnwise_out")]
        out_dir: PathBuf,
    },
    /// Stage 2 on a screen.csv produced by `screen` for the same data.
    Confirm {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Screen table to confirm.
        #[arg(long)]
        screen: PathBuf,
        #[arg(long, default_value = "turnwise_out")]
        out_dir: PathBuf,
    },
    /// Monte Carlo size and power of pooled and corrected tests on synthetic AR(1) panels.
    Calibrate {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Monte Carlo replicates per experiment (at least 100).
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Also write calibration.csv into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Within-conversation label permutation baseline for one metric-label pair.
    Permute {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        label: String,
        /// Permutation replicates (at least 100).
        #[arg(long = "B", visible_alias = "permutations", default_value_t = 1000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Level of each per-conversation test.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 5)]
        min_conv_len: usize,
        /// Also write the null distribution to permutation.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Append a derived metric column (EWMA or first difference) and write the dataset.
    Transform {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        metric: String,
        #[arg(long, value_enum)]
        op: TransformOp,
        /// EWMA smoothing factor in (0, 1].
        #[arg(long)]
        alpha: Option<f64>,
        /// Output file; format follows its extension.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_conv_len: usize,
    },
    /// Write a synthetic AR(1) study in the standard input layout.
    Synth {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; format follows its extension.
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformOp {
    Ewma,
    Diff,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-form turn table (one row per turn).
    pub data: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Extra label columns, besides those with a `label:` prefix.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long, default_value = DEFAULT_ID_COLUMN)]
    pub id_column: String,
    #[arg(long, default_value = DEFAULT_TURN_COLUMN)]
    pub turn_column: String,
}

impl DataArgs {
    pub fn load_options(&self, min_conv_len: usize) -> LoadOptions {
        let format = match self.format {
            Some(FormatArg::Csv) => Format::CSV,
            Some(FormatArg::Tsv) => Format::TSV,
            Some(FormatArg::Jsonl) => Format::JsonLines,
            None => Format::from_path(&self.data),
        };
        LoadOptions {
            format,
            id_column: self.id_column.clone(),
            turn_column: self.turn_column.clone(),
            labels: self.labels.clone(),
            min_conv_len,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Joint,
    PerLabel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    LaggedPearson,
    Acf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Unweighted,
    LengthWeighted,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Level of the robustness criterion.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// BH-FDR level of the pooled screen.
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Block bootstrap replicates (at least 100).
    #[arg(long = "bootstrap_B", visible_alias = "bootstrap-b", default_value_t = 2000)]
    pub bootstrap_b: usize,
    /// Master seed for every resampling stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Family over which BH-FDR is applied.
    #[arg(long = "fdr_scope", visible_alias = "fdr-scope", value_enum, default_value_t = ScopeArg::Joint)]
    pub fdr_scope: ScopeArg,
    /// Per-conversation lag-1 autocorrelation estimator.
    #[arg(long = "rho_estimator", visible_alias = "rho-estimator", value_enum, default_value_t = EstimatorArg::LaggedPearson)]
    pub rho_estimator: EstimatorArg,
    /// Averaging of per-conversation autocorrelations.
    #[arg(long = "rho_weighting", visible_alias = "rho-weighting", value_enum, default_value_t = WeightingArg::Unweighted)]
    pub rho_weighting: WeightingArg,
    /// Minimum gap-free run for a conversation to enter the mean autocorrelation.
    #[arg(long = "min_conv_len", visible_alias = "min-conv-len", default_value_t = 5)]
    pub min_conv_len: usize,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl ConfigArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            alpha: self.alpha,
            q: self.q,
            bootstrap_b: self.bootstrap_b,
            seed: self.seed,
            fdr_scope: match self.fdr_scope {
                ScopeArg::Joint => FdrScope::Joint,
                ScopeArg::PerLabel => FdrScope::PerLabel,
            },
            rho_estimator: match self.rho_estimator {
                EstimatorArg::LaggedPearson => RhoEstimator::LaggedPearson,
                EstimatorArg::Acf => RhoEstimator::Acf,
            },
            rho_weighting: match self.rho_weighting {
                WeightingArg::Unweighted => RhoWeighting::Unweighted,
                WeightingArg::LengthWeighted => RhoWeighting::LengthWeighted,
            },
            min_conv_len: self.min_conv_len,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Autocorrelation levels, one metric column each.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    pub rho_levels: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub conversations_per_level: usize,
    #[arg(long, default_value_t = 30)]
    pub min_length: usize,
    #[arg(long, default_value_t = 500)]
    pub max_length: usize,
    /// Population point-biserial correlation between metric and label.
    #[arg(long, default_value_t = 0.10)]
    pub r_true: f64,
    #[arg(long, default_value_t = 0.2)]
    pub base_rate: f64,
    /// Persistence of the latent behind null labels.
    #[arg(long, default_value_t = 0.99)]
    pub null_label_persistence: f64,
}

impl SpecArgs {
    pub fn to_spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_conversations: self.rho_levels.len() * self.conversations_per_level,
            length_range: (self.min_length, self.max_length),
            rho_levels: self.rho_levels.clone(),
            conversations_per_level: self.conversations_per_level,
            r_true: self.r_true,
            label_base_rate: self.base_rate,
            null_label_persistence: self.null_label_persistence,
            seed,
        }
    }
}
