//! `vargibbs`: certified log series, entropy and energy cost reports, and
//! variational Gibbs-state preparation experiments.
//!
//! Exit codes: 0 success, 1 validation error, 2 certificate failure,
//! 3 internal error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vargibbs_core::hamiltonians::Coupling;
use vargibbs_core::variational::EntropyMode;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VARGIBBS_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Certificate(String),
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Certificate(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<vargibbs_core::Error> for CliError {
    fn from(e: vargibbs_core::Error) -> Self {
        use vargibbs_core::Error as E;
        match e {
            E::CertificateFailed(_) => CliError::Certificate(e.to_string()),
            E::NonFinite { .. } => CliError::Internal(e.into()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

#[derive(Parser)]
#[command(name = "vargibbs", version, about = "Variational Gibbs-state preparation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and certify a Fourier series for ln p on [p_min, 1].
    Series(SeriesArgs),
    /// Estimate the von Neumann entropy of a state with a certified series.
    EstimateEntropy(EntropyArgs),
    /// Query-cost reports for entropy and energy estimation.
    Resources(ResourcesArgs),
    /// Run a full free-energy minimization experiment from a config file.
    PrepareGibbs(PrepareArgs),
    /// Write a seeded random Hamiltonian family as JSON.
    Instance(InstanceArgs),
}

#[derive(Args)]
pub struct SeriesArgs {
    #[arg(long)]
    pub p_min: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    FourierExact,
    FourierShots,
}

impl From<ModeArg> for EntropyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => EntropyMode::Exact,
            ModeArg::FourierExact => EntropyMode::FourierExact,
            ModeArg::FourierShots => EntropyMode::FourierShots,
        }
    }
}

#[derive(Args)]
pub struct EntropyArgs {
    /// Density matrix JSON `{"re": [[..]], "im": [[..]]}`.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub state: Option<PathBuf>,
    /// Draw a random state with spectrum in [p_min, 1] instead.
    #[arg(long)]
    pub random: bool,
    /// Qubit count of the random state.
    #[arg(long, default_value_t = 2, requires = "random")]
    pub qubits: usize,
    /// Series JSON from the `series` command; required for Fourier modes.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::FourierExact)]
    pub mode: ModeArg,
    /// Shots per Fourier term in shot mode.
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ResourcesArgs {
    #[arg(long)]
    pub p_min: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub alpha_norm: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CouplingArg {
    AllPairs,
    Chain,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::AllPairs => Coupling::AllPairs,
            CouplingArg::Chain => Coupling::Chain,
        }
    }
}

#[derive(Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CouplingArg::AllPairs)]
    pub coupling: CouplingArg,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.into()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Series(a) => commands::series(&a),
        Command::EstimateEntropy(a) => commands::estimate_entropy(&a),
        Command::Resources(a) => commands::resources(&a),
        Command::PrepareGibbs(a) => commands::prepare_gibbs(&a),
        Command::Instance(a) => commands::instance(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
