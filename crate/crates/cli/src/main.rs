//! `buzzload` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "buzzload",
    version,
    about = "Epidemic VoD workload with buzz regimes"
)]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the model and write the event trace.
    Simulate(SimulateArgs),
    /// Turn a session log or event trace into a sampled workload series.
    Ingest(IngestArgs),
    /// Calibrate the seven rates from one workload trace.
    Estimate(EstimateArgs),
    /// Theoretical or empirical large-deviation spectrum.
    Spectrum(SpectrumArgs),
    /// Reconfiguration time scale, safety margin and server count.
    Provision(ProvisionArgs),
    /// Batch experiments emitting CSV plot data.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Parameter JSON file, or `preset:NAME`.
    #[arg(long)]
    pub params: String,
    /// Number of events to generate.
    #[arg(long, conflicts_with = "until", required_unless_present = "until")]
    pub events: Option<usize>,
    /// Simulated time horizon.
    #[arg(long)]
    pub until: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Start from the empty state instead of the mean-field state.
    #[arg(long)]
    pub from_empty: bool,
    /// Trace output; `.bin` selects the binary format, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the series sampled every `dt`.
    #[arg(long, requires = "dt")]
    pub series_out: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Also write the `start,duration` session log.
    #[arg(long)]
    pub sessions_out: Option<PathBuf>,
    /// Factor applied to session start times in `--sessions-out`.
    #[arg(long, default_value_t = 1.0)]
    pub session_scale: f64,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Session log (`start,duration`) or event trace (`t,kind,...`).
    #[arg(long)]
    pub sessions: PathBuf,
    /// Start times are divided by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Series, event trace or session log.
    #[arg(long)]
    pub series: PathBuf,
    /// Time scale applied when the input is a session log.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Log-spaced `mu` candidates `lo:hi:n`.
    #[arg(long)]
    pub mu_grid: Option<String>,
    #[arg(long)]
    pub buzz_quantile: Option<f64>,
    /// Minimum buzz excursion, in mean viewing times.
    #[arg(long)]
    pub buzz_persistence: Option<f64>,
    #[arg(long)]
    pub switch_penalty: Option<f64>,
    /// Also write the input series annotated with `r_hat` and the restored regime.
    #[arg(long)]
    pub series_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Parameter JSON file or `preset:NAME`; required with `--theoretical`.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, requires = "params")]
    pub theoretical: bool,
    /// Series, event trace or session log for empirical spectra.
    #[arg(
        long,
        conflicts_with = "theoretical",
        required_unless_present = "theoretical"
    )]
    pub series: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Comma-separated time scales of the empirical spectra.
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub tau: Vec<f64>,
    /// Tilt grid `lo:hi:n`, in units of `1/i_max` (the largest observed
    /// level for empirical spectra without `--params`).
    #[arg(long, default_value = "-3:3:201", allow_hyphen_values = true)]
    pub q: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ProvisionArgs {
    /// Spectrum CSV.
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Curve used for the margin: a time scale, or `inf` for the theoretical
    /// one. Defaults to the theoretical curve, else the largest scale.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, requires = "sigma_star")]
    pub alpha_star: Option<f64>,
    #[arg(long, requires = "alpha_star")]
    pub sigma_star: Option<f64>,
    #[arg(long, requires = "buffer")]
    pub p_loss: Option<f64>,
    #[arg(long, requires = "p_loss")]
    pub buffer: Option<f64>,
    /// Link capacity for the server count.
    #[arg(long, requires = "p_loss")]
    pub capacity: Option<f64>,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum ExperimentCommand {
    /// Relative estimation error over independent replications.
    Boxplot(ReplicationArgs),
    /// Mean squared error against trace length.
    Mse(MseArgs),
    /// Theoretical and multi-scale empirical spectra of one trace.
    Spectra(SpectraArgs),
    /// Estimate, re-simulate and compare histogram and autocorrelation.
    Closure(ClosureArgs),
}

#[derive(Args)]
pub struct ReplicationArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    #[arg(long, default_value_t = 1 << 21)]
    pub events: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "boxplot")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct MseArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    /// Comma-separated trace lengths in events.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "32768,131072,524288,2097152"
    )]
    pub lengths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "mse")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long, default_value_t = 1 << 21)]
    pub events: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long, default_value = "spectra")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ClosureArgs {
    /// Session log, event trace or series.
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
    /// Sampling step of the comparison; a tenth of the fitted mean viewing
    /// time when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "closure")]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Provision(a) => commands::provision(a),
        Command::Experiment(e) => commands::experiment(e),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
