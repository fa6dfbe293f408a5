//! `trinelhv`: joint-measurability checks, local-model LPs and the full-range
//! locality certificate for the noisy trine, from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::{Format, Sink};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] trinelhv::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(trinelhv::Error::Domain { .. }) => 2,
            _ => 1,
        }
    }
}

/// Result of a subcommand that completed without error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A FAIL verdict or a search that found nothing.
    Fail,
}

/// Parses a number, also accepting `p/q`.
fn number(s: &str) -> Result<f64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let v = match s.split_once('/') {
        Some((p, q)) => parse(p)? / parse(q)?,
        None => parse(s)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not a finite number"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "trinelhv",
    version,
    about = "Local-model certificates for noisy trine measurements"
)]
struct Cli {
    /// Worker threads for grid evaluations (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write the results here (CSV, or JSON when the path ends in .json).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of --out, overriding the extension.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Joint measurability of the noisy trine (or the Pauli pair).
    Jm(JmArgs),
    /// Pauli simulation of the noisy trine.
    Simulate(SimulateArgs),
    /// Shrink factor η_B of Bob's measurements for a noise state.
    Etab(EtabArgs),
    /// Visibility LP at one (θ, φ).
    Lp(LpArgs),
    /// One certification chain of glued LP points.
    Chain(ChainArgs),
    /// Full-range certificate (analytic branch plus both chains).
    Certify(CertifyArgs),
    /// Certificate plus the figure data and plot.
    Fig2(Fig2Args),
    /// CHSH value of a Schmidt state: Horodecki formula and see-saw.
    Chsh(ChshArgs),
    /// Assemblage, GHJW reconstruction and back.
    #[command(name = "steer-roundtrip")]
    SteerRoundtrip(SteerArgs),
    /// See-saw search for an I_NN22 violation with lossy measurements.
    Innn22(Innn22Args),
}

#[derive(Args, Debug)]
pub struct JmArgs {
    /// The three trine measurements (the default family).
    #[arg(long, conflicts_with = "pauli")]
    pub trine: bool,
    /// The X/Z Pauli pair instead of the trine.
    #[arg(long)]
    pub pauli: bool,
    /// Visibility.
    #[arg(long, default_value = "0.67", value_parser = number)]
    pub eta: f64,
    /// Bisect the compatibility thresholds instead of checking one visibility.
    #[arg(long)]
    pub threshold: bool,
    /// Bisection tolerance.
    #[arg(long, default_value = "1e-6", value_parser = number)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = number)]
    pub eta: f64,
}

#[derive(Args, Debug)]
pub struct EtabArgs {
    /// Noise state ζ = (𝟙 + α·Z)/2; fractions like 5/6 are accepted.
    #[arg(long, value_parser = number)]
    pub alpha: f64,
    /// Ternary grid spacing, degrees.
    #[arg(long, default_value = "3", value_parser = number)]
    pub ternary_step: f64,
    /// Binary grid spacing, degrees.
    #[arg(long, default_value = "1", value_parser = number)]
    pub binary_step: f64,
    /// Cross-check the minimiser against the enumerated facets.
    #[arg(long)]
    pub facets: bool,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct BranchArgs {
    /// Noise parameter α; without it every published branch is used.
    #[arg(long, value_parser = number)]
    pub alpha: Option<f64>,
    /// Shrink factor for --alpha (defaults to the published value).
    #[arg(long, value_parser = number, requires = "alpha")]
    pub eta_b: Option<f64>,
}

#[derive(Args, Debug)]
pub struct LpArgs {
    #[arg(long, value_parser = number)]
    pub theta: f64,
    #[arg(long, default_value = "0", value_parser = number)]
    pub phi: f64,
    #[command(flatten)]
    pub branch: BranchArgs,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GridArgs {
    /// Stop when consecutive chain points are closer than this.
    #[arg(long, default_value = "1e-4", value_parser = number)]
    pub epsilon: f64,
    /// φ grid spacing, degrees.
    #[arg(long, default_value = "0.1", value_parser = number)]
    pub delta_phi: f64,
    /// Largest grid angle, degrees.
    #[arg(long, default_value = "30", value_parser = number)]
    pub phi_max: f64,
    /// Visibility to certify.
    #[arg(long, default_value = "0.67", value_parser = number)]
    pub target: f64,
    /// Shrink grid minima by v(Δφ/2) instead of v(Δφ).
    #[arg(long)]
    pub half_step: bool,
}

#[derive(Args, Debug)]
pub struct ChainArgs {
    #[arg(long, value_parser = number)]
    pub alpha: f64,
    #[arg(long, value_parser = number)]
    pub eta_b: Option<f64>,
    /// Starting angle (default π/4).
    #[arg(long, value_parser = number)]
    pub theta0: Option<f64>,
    /// Stop once the glued interval reaches this angle.
    #[arg(long, value_parser = number)]
    pub floor: Option<f64>,
    #[arg(long, default_value = "10000")]
    pub max_points: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Chain CSV to append to and resume from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of samples of the analytic branch.
    #[arg(long, default_value = "200")]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct Fig2Args {
    #[command(flatten)]
    pub certify: CertifyArgs,
    /// Output path without extension; `.csv` and `.svg` are written.
    #[arg(long, default_value = "fig2")]
    pub stem: PathBuf,
}

#[derive(Args, Debug)]
pub struct ChshArgs {
    #[arg(long, value_parser = number)]
    pub theta: f64,
    #[arg(long, default_value = "0", value_parser = number)]
    pub phi: f64,
    /// Visibility of Alice's observables.
    #[arg(long, default_value = "1", value_parser = number)]
    pub visibility: f64,
    #[arg(long, default_value = "16")]
    pub restarts: usize,
}

#[derive(Args, Debug)]
pub struct SteerArgs {
    #[arg(long, default_value = "0.3", value_parser = number)]
    pub theta: f64,
    #[arg(long, default_value = "0.7", value_parser = number)]
    pub phi: f64,
}

#[derive(Args, Debug)]
pub struct Innn22Args {
    /// Number of settings per party.
    #[arg(long, default_value = "3")]
    pub n: usize,
    /// Alice's detection efficiency (default 1/(N−1)).
    #[arg(long, value_parser = number)]
    pub eta: Option<f64>,
    /// Local dimension (default N).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value = "50")]
    pub restarts: usize,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Witness dump (`part,index,row,col,value`).
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<Status, CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let sink = Sink::new(cli.out, cli.format);
    match cli.command {
        Command::Jm(a) => commands::jm(&a, &sink),
        Command::Simulate(a) => commands::simulate(&a, &sink),
        Command::Etab(a) => commands::etab(&a, &sink),
        Command::Lp(a) => commands::lp(&a, &sink),
        Command::Chain(a) => commands::chain(&a, &sink),
        Command::Certify(a) => commands::certify(&a, &sink),
        Command::Fig2(a) => commands::fig2(&a, &sink),
        Command::Chsh(a) => commands::chsh(&a, &sink),
        Command::SteerRoundtrip(a) => commands::steer_roundtrip(&a, &sink),
        Command::Innn22(a) => commands::innn22(&a, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_fractions() {
        assert_eq!(number("0.25").unwrap(), 0.25);
        assert_eq!(number("5/6").unwrap(), 5.0 / 6.0);
        assert!(number("1/0").is_err());
        assert!(number("abc").is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
