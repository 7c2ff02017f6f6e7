//! `heatdiff`: command-line front end. `simulate` and `calibrate` talk to a
//! heatdiff service, either a running one (`--server`) or one started
//! in-process on a loopback port.

mod local;
mod remote;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatdiff_api::GammaSource;

#[derive(Parser)]
#[command(name = "heatdiff", version, about = "Residential heating technology diffusion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and export the results.
    Simulate(SimulateArgs),
    /// Fit the intangible cost terms to the historical share trends.
    Calibrate(CalibrateArgs),
    /// Perturb key parameters around base scenarios.
    Sensitivity(SensitivityArgs),
    /// Difference two exported runs.
    Compare(CompareArgs),
    /// Serve datasets over HTTP.
    Serve(ServeArgs),
    /// Check a dataset without running anything.
    Validate(ValidateArgs),
    /// Regenerate the synthetic dataset and the preset scenario files.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Target {
    /// Dataset directory. Loaded into an in-process service unless --server is given.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Base URL of a running service, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    server: Option<String>,
    /// Dataset id on the server; defaults to the --data directory name or the only dataset served.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GammaArg {
    Zero,
    Auto,
    Dataset,
}

impl From<GammaArg> for GammaSource {
    fn from(g: GammaArg) -> Self {
        match g {
            GammaArg::Zero => GammaSource::Zero,
            GammaArg::Auto => GammaSource::Auto,
            GammaArg::Dataset => GammaSource::Dataset,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    target: Target,
    /// Scenario file (JSON) or preset id a..j.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 2015)]
    from: i32,
    #[arg(long, default_value_t = 2050)]
    to: i32,
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    /// Disable premature scrapping.
    #[arg(long)]
    no_scrapping: bool,
    /// Model parameters as JSON, overriding the defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Starting γ; shipped gammas if the dataset has them, a fresh fit otherwise.
    #[arg(long, value_enum)]
    gamma: Option<GammaArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    target: Target,
    /// Output gamma CSV.
    #[arg(long)]
    out: PathBuf,
    /// Fit only this region; the others keep their current γ.
    #[arg(long)]
    region: Option<String>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    data: PathBuf,
    /// Preset ids or scenario files, comma separated, or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    base: Vec<String>,
    #[arg(long, default_value_t = 2015)]
    from: i32,
    #[arg(long, default_value_t = 2050)]
    to: i32,
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Exported runs (run.json or its directory): the scenario, then the reference.
    #[arg(long = "run", num_args = 1, required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Dataset directories; repeat to serve several.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Where completed runs are kept across restarts.
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    /// Idle seconds before a session expires.
    #[arg(long, default_value_t = 3600)]
    session_ttl: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Horizon the dataset must cover.
    #[arg(long, default_value_t = 2015)]
    from: i32,
    #[arg(long, default_value_t = 2050)]
    to: i32,
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset directory to write.
    #[arg(long, default_value = "data/synthetic")]
    out: PathBuf,
    /// Directory for the preset scenario files.
    #[arg(long, default_value = "data/presets")]
    presets: PathBuf,
}

/// A failure with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

impl Failure {
    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_VALIDATION, error: error.into() }
    }

    pub fn not_converged(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_NOT_CONVERGED, error: error.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: EXIT_OTHER, error }
    }
}

impl From<heatdiff_core::Error> for Failure {
    fn from(e: heatdiff_core::Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_OTHER };
        Failure { code, error: e.into() }
    }
}

impl From<heatdiff_client::ClientError> for Failure {
    fn from(e: heatdiff_client::ClientError) -> Self {
        let code = if e.api().is_some_and(|a| a.is_validation()) { EXIT_VALIDATION } else { EXIT_OTHER };
        Failure { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_OTHER, error: e.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(heatdiff_core::Error::Dataset(violations)) = self.error.downcast_ref() {
            write!(f, "dataset has {} violation(s):", violations.len())?;
            for v in violations {
                write!(f, "\n  {v}")?;
            }
            return Ok(());
        }
        write!(f, "{:#}", self.error)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();

    let outcome = match cli.command {
        Command::Simulate(args) => remote::simulate(args),
        Command::Calibrate(args) => remote::calibrate(args),
        Command::Serve(args) => remote::serve(args),
        Command::Sensitivity(args) => local::sensitivity(args),
        Command::Compare(args) => local::compare(args),
        Command::Validate(args) => local::validate(args),
        Command::Synth(args) => local::synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
