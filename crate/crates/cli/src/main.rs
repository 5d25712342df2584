//! `smartbag`: command suite for the smart bag pipeline.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

mod ml;
mod services;

use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Flags parse but make no sense together (exit 2).
    Usage(String),
    /// The command ran and failed (exit 1).
    Failed(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failed(e.into())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "smartbag",
    version,
    about = "Smart bag activity recognition and telemetry pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic sensor dataset as CSV.
    Gen(GenArgs),
    /// Train the activity network and write a model file.
    Train(TrainArgs),
    /// Evaluate a model file on a CSV dataset.
    Eval(EvalArgs),
    /// Write a simulated frame trace, one wire frame per line.
    Simulate(SimulateArgs),
    /// Run the document store server.
    Store(StoreArgs),
    /// Run the telemetry gateway.
    Gateway(GatewayArgs),
    /// Run the alert service.
    Alerts(AlertsArgs),
    /// Stream a recorded trace to a gateway's TCP frame source.
    Replay(ReplayArgs),
    /// Ask a bag to sound its find-my-bag alarm.
    Alarm(AlarmArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of rows.
    #[arg(long, default_value_t = 1743, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labelled CSV dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Fraction of rows used for training; the rest is the test set.
    #[arg(long, default_value_t = 0.9)]
    pub split: f64,
    /// Seed for the split, initialization and shuffling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![15, 20, 25, 30, 60])]
    pub hidden: Vec<usize>,
    /// Output model path.
    #[arg(long, default_value = "model.bagm")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate only the test part of a split made with this fraction (as in
    /// `train --split`).
    #[arg(long)]
    pub split: Option<f64>,
    /// Split seed, used with --split.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "BAG1")]
    pub device: String,
    /// Number of frames.
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Milliseconds between frame timestamps.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub interval_ms: u64,
    /// Timestamp of the first frame (Unix ms).
    #[arg(long, default_value_t = 1_700_000_000_000)]
    pub start_ts: u64,
    /// Frame sequence numbers on which SOS is pressed, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sos_at: Vec<u32>,
    /// Class indices cycled in blocks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<usize>,
    /// Frames per schedule block.
    #[arg(long, default_value_t = 10)]
    pub block: u32,
    /// Output trace path.
    #[arg(long, default_value = "trace.txt")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StoreArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Append-only operation log, replayed on start.
    #[arg(long, default_value = "store.log")]
    pub log: PathBuf,
    /// Require `Authorization: Bearer <token>` on every request.
    #[arg(long)]
    pub token: Option<String>,
}

#[derive(Args, Debug)]
pub struct GatewayArgs {
    /// TOML file with any of: device, store_url, token, period_ms,
    /// capacity, events_log. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub device: Option<String>,
    /// Store base URL.
    #[arg(long)]
    pub store: Option<String>,
    #[arg(long)]
    pub token: Option<String>,
    /// Push period in milliseconds of (possibly accelerated) clock time.
    #[arg(long)]
    pub period_ms: Option<u64>,
    /// Offline buffer capacity in records.
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Read frames from a trace file, paced by frame timestamps.
    #[arg(long, group = "source")]
    pub trace: Option<PathBuf>,
    /// Accept frames over TCP on this address.
    #[arg(long, group = "source")]
    pub listen: Option<SocketAddr>,
    /// Generate frames with the built-in simulator.
    #[arg(long, group = "source")]
    pub simulate: bool,
    /// Simulator seed.
    #[arg(long, default_value_t = 42)]
    pub sim_seed: u64,
    /// Clock speed factor; 10 runs ten times faster than real time.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Exit once the source is exhausted and the buffer is flushed.
    #[arg(long)]
    pub exit_when_done: bool,
    /// Append ALARM_TRIGGERED events to this notification log.
    #[arg(long)]
    pub events_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlertsArgs {
    /// TOML alert service config. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<String>,
    #[arg(long)]
    pub token: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Device to watch; repeatable.
    #[arg(long = "device")]
    pub devices: Vec<String>,
    /// Notification log path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub cursor: Option<PathBuf>,
    #[arg(long)]
    pub webhook: Option<String>,
    #[arg(long)]
    pub poll_ms: Option<u64>,
    /// Clock speed factor.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Run a single poll and exit.
    #[arg(long)]
    pub once: bool,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Recorded trace file.
    #[arg(long)]
    pub trace: PathBuf,
    /// Gateway TCP source address.
    #[arg(long)]
    pub to: SocketAddr,
    /// Playback speed factor; 0 sends without pauses.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Args, Debug)]
pub struct AlarmArgs {
    pub device: String,
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub store: String,
    #[arg(long)]
    pub token: Option<String>,
}

fn init_logging() {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Gen(a) => ml::gen(a),
        Command::Train(a) => ml::train(a),
        Command::Eval(a) => ml::eval(a),
        Command::Simulate(a) => services::simulate(a),
        Command::Store(a) => services::store(a),
        Command::Gateway(a) => services::gateway(a),
        Command::Alerts(a) => services::alerts(a),
        Command::Replay(a) => services::replay(a),
        Command::Alarm(a) => services::alarm(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
