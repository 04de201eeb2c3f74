//! `nopa`: evaluate, scan, optimise and simulate Bell tests on the
//! two-mode squeezed vacuum.
//!
//! Exit codes: 0 success, 2 malformed arguments, 3 value out of range,
//! 4 I/O failure, 5 photon-number truncation failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nopa_bell::bell::Combination;
use nopa_bell::fock::Cutoff;
use nopa_bell::mc::DetectorModel;
use nopa_bell::ComplexAmplitude;

use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] nopa_bell::Error),
    #[error("{}: {source}", path.as_ref().map_or("<stdout>".to_string(), |p| p.display().to_string()))]
    Io { path: Option<PathBuf>, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(nopa_bell::Error::InvalidInput(_) | nopa_bell::Error::Range(_)) => 3,
            CliError::Lib(nopa_bell::Error::Truncation(_)) => 5,
            CliError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nopa", version, about = "Phase-space functions and Bell tests for the two-mode squeezed vacuum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one quantity at the given squeezing and displacements.
    Eval(EvalArgs),
    /// Wigner function on a real (alpha, beta) grid.
    Fig1(PhaseGridArgs),
    /// Q function on a real (alpha, beta) grid.
    Fig2(PhaseGridArgs),
    /// CH combination over a (J, r) grid, raw and clipped to the violation region.
    Fig4(ChGridArgs),
    /// Best CH value per squeezing parameter, on the grid and refined.
    ScanCh(ChGridArgs),
    /// Search displacement settings for maximal violation.
    Optimize(OptimizeArgs),
    /// Monte Carlo simulation of displaced photon counting.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Wigner,
    Qfunc,
    Parity,
    NocountJoint,
    NocountSingle,
    Ch,
    Chsh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingsSource {
    /// Take the four displacements from the flags.
    Explicit,
    /// Use the optimiser's restricted-family optimum.
    Optimized,
}

fn complex(s: &str) -> Result<ComplexAmplitude, String> {
    s.parse().map_err(|e: nopa_bell::Error| e.to_string())
}

fn combination(s: &str) -> Result<Combination, String> {
    s.parse().map_err(|e: nopa_bell::Error| e.to_string())
}

fn detector(s: &str) -> Result<DetectorModel, String> {
    s.parse().map_err(|e: nopa_bell::Error| e.to_string())
}

fn cutoff(s: &str) -> Result<Cutoff, String> {
    s.parse().map_err(|e: nopa_bell::Error| e.to_string())
}

/// Unset displacements are zero.
#[derive(Debug, Args)]
pub struct Displacements {
    /// Displacement of detector a, written `a+bi`.
    #[arg(long, value_parser = complex, allow_hyphen_values = true)]
    pub alpha: Option<ComplexAmplitude>,
    /// Displacement of detector b, written `a+bi`.
    #[arg(long, value_parser = complex, allow_hyphen_values = true)]
    pub beta: Option<ComplexAmplitude>,
    /// Second displacement of detector a (Bell combinations only).
    #[arg(long, value_parser = complex, allow_hyphen_values = true)]
    pub alpha_prime: Option<ComplexAmplitude>,
    /// Second displacement of detector b (Bell combinations only).
    #[arg(long, value_parser = complex, allow_hyphen_values = true)]
    pub beta_prime: Option<ComplexAmplitude>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file (plus `<PATH>.manifest.json`) instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub quantity: Quantity,
    /// Squeezing parameter r ≥ 0.
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[command(flatten)]
    pub disp: Displacements,
    /// Displacement intensity: use α = √J, β = −√J, α′ = β′ = 0 (ch, chsh).
    #[arg(long = "J", allow_hyphen_values = true)]
    pub intensity: Option<f64>,
    /// Where the Bell settings come from (ch, chsh).
    #[arg(long, value_enum, default_value = "explicit")]
    pub settings: SettingsSource,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PhaseGridArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub r: f64,
    /// Lower end of both real axes.
    #[arg(long, allow_hyphen_values = true, default_value_t = -2.0)]
    pub grid_min: f64,
    /// Upper end of both real axes (inclusive).
    #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
    pub grid_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 81)]
    pub grid_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ChGridArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.5)]
    pub j_max: f64,
    #[arg(long, default_value_t = 151)]
    pub j_points: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 101)]
    pub r_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    /// chsh or ch.
    #[arg(long, value_parser = combination, default_value = "chsh")]
    pub combination: Combination,
    /// Iteration budget of the simplex refinement.
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Convergence threshold on the objective.
    #[arg(long, default_value_t = 1e-10)]
    pub ftol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[command(flatten)]
    pub disp: Displacements,
    /// number (parity) or binary (no-count); defaults to the one the
    /// combination needs, else number.
    #[arg(long, value_parser = detector)]
    pub detector: Option<DetectorModel>,
    /// Simulate a whole Bell experiment (chsh or ch) instead of one setting.
    #[arg(long, value_parser = combination)]
    pub combination: Option<Combination>,
    /// Trials (per setting for Bell experiments).
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Photon-number cutoff: `auto` or an integer.
    #[arg(long, value_parser = cutoff, default_value = "auto")]
    pub cutoff: Cutoff,
    /// Largest tolerated loss of probability mass to truncation.
    #[arg(long, default_value_t = nopa_bell::fock::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print and exit 0; real errors exit 2.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Eval(a) => commands::eval(a),
        Command::Fig1(a) => commands::phase_grid(a, commands::PhaseFunction::Wigner),
        Command::Fig2(a) => commands::phase_grid(a, commands::PhaseFunction::Q),
        Command::Fig4(a) => commands::fig4(a),
        Command::ScanCh(a) => commands::scan_ch(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Mc(a) => commands::mc(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
