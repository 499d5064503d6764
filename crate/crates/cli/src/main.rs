//! `tilegen` command-line interface.

mod cdf;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tilegen::{Error, RngAlgorithm};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "tilegen", version, about = "Equal-tile rejection sampling for univariate densities")]
pub struct Cli {
    /// Seed of the uniform source.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Uniform source algorithm: xoshiro256pp or pcg64.
    #[arg(long, global = true, default_value = "xoshiro256pp")]
    pub rng: RngAlgorithm,

    /// Sampler states forked over the shared table (sample, bench).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1024))]
    pub threads: u32,

    /// Emit reports as JSON.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tile a density and write the table plus per-level statistics.
    Build(BuildArgs),
    /// Draw variates from a table.
    Sample(SampleArgs),
    /// Summarize a table file.
    Stats(StatsArgs),
    /// Goodness-of-fit test of a variate file.
    Gof(GofArgs),
    /// Measure sampling throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// `builtin:<name>[:k=v,...]` or `table:<path>[:<interp>]`.
    #[arg(long)]
    pub density: String,

    /// Mass point `c=<real>,eps=<real>`; repeatable.
    #[arg(long = "mass-point")]
    pub mass_points: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub density: DensityArgs,

    /// Stop once the rejection rate R is at most this.
    #[arg(long)]
    pub target_r: Option<f64>,

    /// Stop once the evaluation rate E is at most this.
    #[arg(long)]
    pub target_e: Option<f64>,

    /// Refine to exactly this level.
    #[arg(long, conflicts_with_all = ["target_r", "target_e", "max_level"])]
    pub level: Option<u32>,

    /// Highest level to refine to.
    #[arg(long)]
    pub max_level: Option<u32>,

    /// Tile memory budget, e.g. 67108864, 64M or 1MiB.
    #[arg(long, value_parser = parse_bytes)]
    pub memory_budget: Option<u64>,

    /// Density samples per column when profiling.
    #[arg(long)]
    pub samples_per_column: Option<usize>,

    /// Table file to write.
    #[arg(long)]
    pub out: std::path::PathBuf,

    /// Per-level statistics CSV to write.
    #[arg(long)]
    pub stats: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    /// One decimal per line.
    Text,
    /// Packed little-endian doubles.
    F64le,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub table: std::path::PathBuf,

    #[command(flatten)]
    pub density: DensityArgs,

    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,

    #[arg(long, value_enum, default_value_t = SampleFormat::Text)]
    pub format: SampleFormat,

    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub table: std::path::PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GofKind {
    ChiSquare,
    Ks,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    /// Variate file.
    #[arg(long)]
    pub input: std::path::PathBuf,

    #[arg(long, value_enum, default_value_t = SampleFormat::Text)]
    pub input_format: SampleFormat,

    /// Density for chi-square expected bin masses.
    #[arg(long, conflicts_with = "cdf")]
    pub density: Option<String>,

    #[arg(long = "mass-point", requires = "density")]
    pub mass_points: Vec<String>,

    /// Closed-form CDF for the KS test, e.g. `normal:mu=0,sigma=1`.
    #[arg(long)]
    pub cdf: Option<String>,

    /// Defaults to chi-square with --density and ks with --cdf.
    #[arg(long, value_enum)]
    pub test: Option<GofKind>,

    #[arg(long, default_value_t = 64)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub table: std::path::PathBuf,

    #[command(flatten)]
    pub density: DensityArgs,

    #[arg(long, default_value_t = 10_000_000)]
    pub n: u64,

    /// Variates per batch between busywork rounds.
    #[arg(long, default_value_t = 1 << 16)]
    pub batch: usize,

    /// Sweep this much scratch memory between batches, e.g. 8M.
    #[arg(long, value_parser = parse_bytes, num_args = 0..=1, default_missing_value = "8M")]
    pub interleave: Option<u64>,

    /// Also time a rebuild of the table from the density.
    #[arg(long)]
    pub setup: bool,
}

/// Parses a byte count with an optional K, M or G suffix (powers of 1024).
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let t = t.strip_suffix("iB").or_else(|| t.strip_suffix('B')).unwrap_or(t);
    let (digits, shift) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 10),
        Some('M' | 'm') => (&t[..t.len() - 1], 20),
        Some('G' | 'g') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    let v: u64 = digits.trim().parse().map_err(|_| format!("'{s}' is not a byte count"))?;
    v.checked_mul(1 << shift).ok_or_else(|| format!("'{s}' is too large"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::InsufficientSamples { .. } => EXIT_USAGE,
        Error::Format(_) | Error::Io(_) | Error::InvalidTable(_) => EXIT_FORMAT,
        _ => EXIT_NUMERIC,
    }
}

fn report_error(code: &str, message: &str) {
    let line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("{code}: {line}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            report_error("E_USAGE", first.trim_start_matches("error: "));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.code(), &e.to_string());
            ExitCode::from(exit_code(&e))
        }
    }
}
