//! Command-line driver for the compression pipeline.
//!
//! Exit codes: 0 success, 2 argument errors, 3 I/O errors, 4 strict-mode
//! overflow, 5 corrupt container, 6 verification failure.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fz_core::{EbMode, Error};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_OVERFLOW: u8 = 4;
pub const EXIT_CORRUPT: u8 = 5;
pub const EXIT_VERIFY_FAILED: u8 = 6;

#[derive(Parser)]
#[command(
    name = "fz",
    about = "Error-bounded lossy compressor for scientific float grids",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a raw f32 field (or a generated one) into a .fz container.
    Compress(CompressArgs),
    /// Decompress a .fz container back to raw f32.
    Decompress(DecompressArgs),
    /// Compress, decompress and check the error bound in one run.
    Verify(VerifyArgs),
    /// Rate-distortion sweep over a list of error bounds; emits CSV.
    Sweep(SweepArgs),
    /// Throughput measurement with per-stage breakdown.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EbModeArg {
    Rel,
    Abs,
}

impl From<EbModeArg> for EbMode {
    fn from(m: EbModeArg) -> EbMode {
        match m {
            EbModeArg::Rel => EbMode::Relative,
            EbModeArg::Abs => EbMode::Absolute,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

/// Where the input field comes from: a raw file or a generator.
#[derive(Args)]
struct SourceArgs {
    /// Raw little-endian f32 input file (row-major).
    #[arg(long, conflicts_with = "generate")]
    input: Option<std::path::PathBuf>,
    /// Generate the field instead: constant | ramp | sine-product |
    /// uniform-noise | smooth-random-walk.
    #[arg(long)]
    generate: Option<String>,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid extents, slowest-varying first, e.g. --dims 100,500,500.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Error bound value.
    #[arg(long)]
    eb: f64,
    /// Bound mode: relative to the value range, or absolute.
    #[arg(long, value_enum, default_value = "rel")]
    eb_mode: EbModeArg,
    /// Fail instead of saturating when a delta exceeds 16 bits.
    #[arg(long)]
    strict: bool,
    /// Natural-log transform before quantization (positive fields only).
    #[arg(long)]
    log_transform: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output container path (defaults to <input>.fz or generated.fz).
    #[arg(long)]
    output: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct DecompressArgs {
    /// Input .fz container.
    #[arg(long)]
    input: std::path::PathBuf,
    /// Output raw f32 path.
    #[arg(long)]
    output: std::path::PathBuf,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    eb: f64,
    #[arg(long, value_enum, default_value = "rel")]
    eb_mode: EbModeArg,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    log_transform: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Report format.
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
    /// Link bandwidth (GB/s) for the overall-throughput model.
    #[arg(long, default_value_t = fz_core::metrics::DEFAULT_LINK_BANDWIDTH_GB_S)]
    bandwidth: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated error bounds, e.g. --ebs 1e-2,5e-3,1e-3,5e-4,1e-4.
    #[arg(long, value_delimiter = ',', required = true)]
    ebs: Vec<f64>,
    #[arg(long, value_enum, default_value = "rel")]
    eb_mode: EbModeArg,
    #[arg(long)]
    log_transform: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    eb: f64,
    #[arg(long, value_enum, default_value = "rel")]
    eb_mode: EbModeArg,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Repetitions; the median is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = fz_core::metrics::DEFAULT_LINK_BANDWIDTH_GB_S)]
    bandwidth: f64,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::FileSize { .. } => EXIT_IO,
        Error::StrictOverflow { .. } => EXIT_OVERFLOW,
        Error::Corrupt(_) => EXIT_CORRUPT,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compress(args) => commands::compress(args),
        Command::Decompress(args) => commands::decompress(args),
        Command::Verify(args) => commands::verify(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
