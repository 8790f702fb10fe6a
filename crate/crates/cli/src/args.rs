use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "airq",
    version,
    about = "Hourly air-quality forecasting and rolling-origin evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regularize a raw CSV onto an hourly grid and fill its gaps.
    Ingest(IngestArgs),
    /// Rolling evaluation of one method over candidate training intervals.
    Sweep(SweepArgs),
    /// Rolling evaluation of several methods on shared windows.
    Compare(CompareArgs),
    /// Write a synthetic PM2.5-like series.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML file with defaults for any flag; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for window and order-search parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Where the series comes from: a CSV file, or a synthetic series otherwise.
#[derive(Debug, Args, Default)]
pub struct SourceArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Length of the synthetic series when no input is given.
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct WindowArgs {
    /// Number of forecast origins.
    #[arg(long)]
    pub windows: Option<usize>,
    /// Hours between consecutive origins.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "timestamp")]
    pub timestamp_col: String,
    #[arg(long, default_value = "value")]
    pub value_col: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One of es, arima (or sarima), lstm.
    #[arg(long)]
    pub method: Option<String>,
    /// Candidate training intervals, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub train_len: Option<Vec<usize>>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub windows: WindowArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated subset of es, arima, lstm.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Training interval for ES and SARIMA; the LSTM uses its train_size.
    #[arg(long)]
    pub train_len: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub windows: WindowArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}
