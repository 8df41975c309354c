//! Command-line front end for the BRQ simulator and rate calculator.
//!
//! Exit codes: 0 ok, 1 a `validate` check failed, 2 usage or config error,
//! 3 numerical failure, 4 integrity failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use brq_core::BrqError;
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod table;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] BrqError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("{0} validation check(s) failed")]
    ValidationFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Integrity(_) => 4,
            CliError::ValidationFailed(_) => 1,
            CliError::Core(e) => match e.root() {
                BrqError::QuadratureNonConvergence { .. }
                | BrqError::BisectionFailure(_)
                | BrqError::InfiniteDelay => 3,
                BrqError::ChainBroken { .. } | BrqError::DecodeError(_) => 4,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "brq",
    version,
    about = "Backtrack retransmission link simulator and rate calculator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic average rates and delay.
    Analytic(Flags),
    /// Monte Carlo simulation; JSON or one-row CSV summary.
    Simulate(Flags),
    /// Normalized rate vs mean SNR table.
    Fig4(Flags),
    /// Absolute rate vs threshold-to-mean ratio table.
    Fig5(Flags),
    /// Cross-check simulation against analytics.
    Validate(Flags),
}

impl Command {
    pub fn split(self) -> (config::CommandKind, Flags) {
        use config::CommandKind as K;
        match self {
            Command::Analytic(f) => (K::Analytic, f),
            Command::Simulate(f) => (K::Simulate, f),
            Command::Fig4(f) => (K::Fig4, f),
            Command::Fig5(f) => (K::Fig5, f),
            Command::Validate(f) => (K::Validate, f),
        }
    }
}

/// Flags shared by all commands. Values are checked when applied to the
/// configuration so file and flag values go through the same parser.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Flat key = value config file; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// rayleigh, deterministic or trace.
    #[arg(long)]
    pub model: Option<String>,
    /// Mean SNR in dB (comma list for analytic and fig4).
    #[arg(long, value_name = "DB", allow_hyphen_values = true)]
    pub mean_snr_db: Option<String>,
    /// Per-slot SNR trace in dB, one value per line.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<String>,
    /// Codebook rate R in bits per channel use.
    #[arg(long)]
    pub rate: Option<String>,
    /// k in R = log2(1 + k * mean SNR) (comma list).
    #[arg(long, value_name = "K")]
    pub rate_factor: Option<String>,
    /// Channel uses per slot N.
    #[arg(long, value_name = "N")]
    pub slot_len: Option<String>,
    /// Feedback bits per slot F (comma list); simulate takes one value.
    #[arg(long, value_name = "F")]
    pub feedback_bits: Option<String>,
    /// Feedback block length L.
    #[arg(long, value_name = "L")]
    pub block_len: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Slots per replication.
    #[arg(long)]
    pub slots: Option<String>,
    #[arg(long)]
    pub replications: Option<String>,
    /// fluid or integer bit accounting.
    #[arg(long)]
    pub mode: Option<String>,
    /// Count the first 2L quantized slots in the statistics.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_warmup: Option<String>,
    /// Carry real payload bits and check them at the receiver.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub payload: Option<String>,
    /// Mean SNR grid in dB for fig4, start:stop:step.
    #[arg(long, value_name = "GRID", allow_hyphen_values = true)]
    pub snr_grid_db: Option<String>,
    /// Threshold-to-mean ratio grid for fig5, start:stop:step.
    #[arg(long, value_name = "GRID")]
    pub ratio_grid: Option<String>,
    /// Add simulated columns to fig4.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub simulate: Option<String>,
    /// Output file (default stdout).
    #[arg(long, short = 'o', value_name = "FILE")]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// simulate: per-slot CSV log of replication 0.
    #[arg(long, value_name = "FILE")]
    pub log: Option<String>,
    /// Worker threads for replications.
    #[arg(long)]
    pub threads: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all: [(&'static str, &Option<String>); 21] = [
            ("model", &self.model),
            ("mean-snr-db", &self.mean_snr_db),
            ("trace", &self.trace),
            ("rate", &self.rate),
            ("rate-factor", &self.rate_factor),
            ("slot-len", &self.slot_len),
            ("feedback-bits", &self.feedback_bits),
            ("block-len", &self.block_len),
            ("seed", &self.seed),
            ("slots", &self.slots),
            ("replications", &self.replications),
            ("mode", &self.mode),
            ("include-warmup", &self.include_warmup),
            ("payload", &self.payload),
            ("snr-grid-db", &self.snr_grid_db),
            ("ratio-grid", &self.ratio_grid),
            ("simulate", &self.simulate),
            ("out", &self.out),
            ("format", &self.format),
            ("log", &self.log),
            ("threads", &self.threads),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

/// Layers the config file (if any) under the flags. The subcommand wins
/// over a `command` key in the file.
pub fn resolve(command: config::CommandKind, flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for (k, v) in flags.pairs() {
        cfg.set(k, v)?;
    }
    cfg.command = Some(command);
    Ok(cfg)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, flags) = cli.command.split();
    let result = resolve(kind, &flags).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("brq: {e}");
            e.exit_code()
        }
    }
}
