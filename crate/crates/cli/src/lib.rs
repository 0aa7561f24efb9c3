//! Command-line driver: argument parsing, configuration loading, run
//! manifests and CSV emission on top of `aqurate-core`.

use std::ffi::OsString;
use std::path::PathBuf;

use aqurate_core::Solver;
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

pub use config::RunConfig;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Parser)]
#[command(name = "aqurate", version, about = "Adaptive-rate compressive-sensing ADC simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed; overrides the `seed` key of the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sweep the oscillator gate voltage and record the output probability.
    Characterize(CharacterizeArgs),
    /// Build the probability-to-voltage calibration table.
    Calibrate(CalibrateArgs),
    /// Run the closed-loop acquisition and recovery experiment.
    Experiment(ExperimentArgs),
    /// Technology-normalized power/area comparison table.
    Scaling(ScalingArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Characterize(_) => "characterize",
            Command::Calibrate(_) => "calibrate",
            Command::Experiment(_) => "experiment",
            Command::Scaling(_) => "scaling",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CharacterizeArgs {
    /// Staircase step in volts.
    #[arg(long, default_value_t = 0.2)]
    pub grid_step: f64,
    /// Dwell time per step in nanoseconds.
    #[arg(long, default_value_t = 100.0)]
    pub dwell_ns: f64,
    /// Samples per step; defaults to one per clock cycle of the dwell time.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Emit the closed-form curve instead of simulating.
    #[arg(long)]
    pub analytic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Voltage step of the table; defaults to `calibration_step` of the config.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Cycles per grid point; defaults to `calibration_samples` of the config.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Use the closed-form curve.
    #[arg(long)]
    pub analytic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Comma-separated sparsity rates.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Comma-separated solvers (`omp`, `cosamp`).
    #[arg(long, value_delimiter = ',')]
    pub solvers: Option<Vec<Solver>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub warmup_frames: Option<usize>,
    /// Frame length (power of two).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Disable additive measurement noise.
    #[arg(long, conflicts_with = "snr_db")]
    pub noiseless: bool,
    /// Oversampling factor of the rate policy.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Trial whose frames are dumped for plotting.
    #[arg(long, default_value_t = 0)]
    pub dump_trial: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    /// Entries CSV (`name,node_nm,v_nominal,power_watts,area`); defaults to the bundled table.
    #[arg(long, value_name = "FILE")]
    pub entries: Option<PathBuf>,
    /// Back-solve raw power/area from published normalized factors.
    #[arg(long)]
    pub inverse: bool,
    /// Published factors CSV used by `--inverse`; defaults to the bundled table.
    #[arg(long, value_name = "FILE", requires = "inverse")]
    pub published: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli, recorded, None) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("aqurate: {e}");
            e.exit_code()
        }
    }
}
