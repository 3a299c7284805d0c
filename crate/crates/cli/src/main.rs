//! `kpidiag`: generate, label, learn from and cluster cell KPI data.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use files::Format;

/// Environment variable supplying the default `--seed`.
pub const SEED_ENV: &str = "KPIDIAG_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input, failed validation.
    #[error("{0}")]
    Input(String),
    /// Output could not be written, or an unexpected failure.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<kpidiag::Error> for CliError {
    fn from(e: kpidiag::Error) -> Self {
        match e.root() {
            kpidiag::Error::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kpidiag", version, about = "Diagnose GSM cell performance from KPI data")]
struct Cli {
    /// Force the dataset file format instead of detecting it from the
    /// extension or content.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic KPI dataset.
    Gen(GenArgs),
    /// Derive CSR, DCR, TR and SDCCHSR from raw counters.
    Derive(DeriveArgs),
    /// Label every record with a rule set.
    Label(LabelArgs),
    /// Train a decision tree on labeled records.
    Train(TrainArgs),
    /// Evaluate a saved tree on labeled records.
    Eval(EvalArgs),
    /// Cluster records with k-means and print per-cluster profiles.
    Cluster(ClusterArgs),
    /// Label, cluster and cross-tabulate in one run.
    Pipeline(PipelineArgs),
    /// Report which rules can ever be the first match.
    RulesCheck(RulesCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Templates,
    Uniform,
    Boundary,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// TOML generation spec; explicit flags override its values.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Generation mode [default: templates].
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Number of records [default: 1000]; ignored in boundary mode.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// `default`, a rule file path, or `none` [default: none].
    #[arg(long)]
    label: Option<String>,
    /// Cluster template CSV replacing the built-in templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Multiplier on template standard deviations [default: 1].
    #[arg(long)]
    separation: Option<f64>,
    /// Offset from each threshold in boundary mode [default: 0.01].
    #[arg(long)]
    eps: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// Counter CSV with columns cell_id, ca, cf, cs, te, oe, sdcch_attempts,
    /// sdcch_successes.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `default` or a rule file path.
    #[arg(long, default_value = "default")]
    rules: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Train on this fraction of a seeded shuffle and report on the rest.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// `none`, `pessimistic[:confidence]` or `reduced[:holdout[:seed]]`.
    #[arg(long, default_value = "pessimistic:0.25")]
    pruning: String,
    /// Laplace-smooth leaf distributions.
    #[arg(long)]
    laplace: bool,
    /// Where the model is saved.
    #[arg(long, default_value = "model.txt")]
    model: PathBuf,
    /// Also write the tree as a rule file.
    #[arg(long)]
    export_rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = "model.txt")]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Evaluate only the held-out part of the split `train --split` used.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Text report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 9)]
    k: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Cluster on raw values instead of z-scores.
    #[arg(long)]
    no_standardize: bool,
    /// Profile table destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `default` or a rule file path.
    #[arg(long, default_value = "default", conflicts_with = "trained_tree")]
    rules: String,
    /// Label with a tree trained on the input labels instead of rules.
    #[arg(long)]
    trained_tree: bool,
    #[arg(long, default_value_t = 9)]
    k: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Directory for the JSON, text and CSV report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RulesCheckArgs {
    /// `default` or a rule file path.
    #[arg(long, default_value = "default")]
    rules: String,
    /// Offset used when placing witness records next to thresholds.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    match cli.command {
        Command::Gen(a) => commands::gen(a, format),
        Command::Derive(a) => commands::derive(a),
        Command::Label(a) => commands::label(a, format),
        Command::Train(a) => commands::train(a, format),
        Command::Eval(a) => commands::eval(a, format),
        Command::Cluster(a) => commands::cluster(a, format),
        Command::Pipeline(a) => commands::pipeline(a, format),
        Command::RulesCheck(a) => commands::rules_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(2),
    }
}
