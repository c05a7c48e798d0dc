//! `icoh`: simulate, fit and analyse multivariate autoregressive models.
//!
//! Exit status: 0 success, 1 usage error, 2 data or I/O error,
//! 3 reproduction check failure.

mod commands;
mod config;
mod error;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icoh::{ExampleId, MeasureId, Window};

#[derive(Debug, Parser)]
#[command(name = "icoh", version, about = "MVAR simulation, fitting and frequency-domain connectivity")]
pub struct Cli {
    /// JSON run configuration; command-line flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a built-in example or a model file and write a time-series text file.
    Simulate(SimulateArgs),
    /// Fit an MVAR model by least squares and write it as JSON.
    Fit(FitArgs),
    /// Fit a model and write one CSV per measure, a peak summary and optional SVG grids.
    Measures(MeasuresArgs),
    /// Run the full check list for a built-in example; exit 3 if any check fails.
    Reproduce(ReproduceArgs),
    /// Locate peaks in a measure CSV.
    Peaks(PeaksArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in example (toy_9_1 or toy_9_2).
    #[arg(long, conflicts_with = "model")]
    pub example: Option<ExampleId>,
    /// Model JSON as written by `fit`.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Number of samples kept after burn-in.
    #[arg(short = 'n', long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Sampling rate in Hz.
    #[arg(long)]
    pub sampling_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout if omitted.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Time-series text file.
    #[arg(short, long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(short = 'p', long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub sampling_rate: Option<f64>,
    /// Output file; stdout if omitted.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeasuresArgs {
    /// Time-series text file.
    #[arg(short, long, value_name = "FILE", conflicts_with = "example")]
    pub input: Option<PathBuf>,
    /// Simulate this built-in example instead of reading a file.
    #[arg(long)]
    pub example: Option<ExampleId>,
    #[arg(short = 'p', long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub n_dft: Option<usize>,
    #[arg(long)]
    pub sampling_rate: Option<f64>,
    /// Lower band edge in Hz.
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Upper band edge in Hz.
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Comma-separated list: coherence, partial_coherence, icoh, ncr, constrained_ncr, pdc, gpdc.
    #[arg(short, long, value_delimiter = ',', value_parser = parse_measure)]
    pub measures: Option<Vec<MeasureId>>,
    /// Seed used with --example.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Samples simulated with --example.
    #[arg(short = 'n', long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Welch segment length for the periodogram overlay.
    #[arg(long)]
    pub segment_len: Option<usize>,
    /// Welch segment overlap fraction in [0, 1).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Welch taper: rectangular, hann or hamming.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    /// Minimum prominence for the peak summary.
    #[arg(long)]
    pub min_prominence: Option<f64>,
    /// Drop innovation cross-covariances so NCR can be computed.
    #[arg(long)]
    pub diagonalize_noise: bool,
    /// Also write SVG figure grids.
    #[arg(long)]
    pub plot: bool,
    #[arg(short = 'o', long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// toy_9_1 or toy_9_2.
    pub example: ExampleId,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short = 'o', long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PeaksArgs {
    /// Measure CSV written by `measures`.
    #[arg(long, value_name = "FILE")]
    pub csv: PathBuf,
    /// Restrict to one receiver (1-based).
    #[arg(long)]
    pub receiver: Option<usize>,
    /// Restrict to one sender (1-based).
    #[arg(long)]
    pub sender: Option<usize>,
    #[arg(long)]
    pub min_prominence: Option<f64>,
    /// Output file; stdout if omitted.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn parse_measure(s: &str) -> Result<MeasureId, String> {
    MeasureId::parse(s).ok_or_else(|| {
        let names: Vec<&str> = MeasureId::ALL.iter().map(|m| m.name()).collect();
        format!("unknown measure '{s}' (expected one of {})", names.join(", "))
    })
}

fn parse_window(s: &str) -> Result<Window, String> {
    match s {
        "rectangular" => Ok(Window::Rectangular),
        "hann" => Ok(Window::Hann),
        "hamming" => Ok(Window::Hamming),
        other => Err(format!("unknown window '{other}' (expected rectangular, hann or hamming)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
