//! Front end for the simulator: argument and config-file handling plus the
//! `simulate`, `gen-trace`, `solve-demotion` and `report` subcommands.

pub mod config;
pub mod report;
pub mod simulate;
pub mod solve;

use std::{
    fs::File,
    io::{BufWriter, Write},
    path::{Path, PathBuf},
};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ramzzz_core::trace::{generate_synthetic_trace, trace_stats, write_trace};

pub use config::{parse_count, ExperimentConfig, SyntheticArgs};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RAMZZZ_OUT_DIR";

/// A usage problem found after argument parsing (e.g. in a merged config).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "ramzzz", version, about = "Trace-driven DRAM power-management simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a policy x architecture x budget matrix over one trace.
    Simulate(Box<simulate::SimulateArgs>),
    /// Write a synthetic hot/cold trace as CSV.
    GenTrace(GenTraceArgs),
    /// Pick demotion timeouts for one idle-period histogram.
    SolveDemotion(solve::SolveArgs),
    /// Turn result JSON files into CSV tables.
    Report(report::ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Output file; `-` writes to stdout.
    #[arg(long, short, default_value = "-")]
    pub out: PathBuf,
    /// Print footprint and per-window statistics (window in cycles) to stderr.
    #[arg(long, value_parser = parse_count)]
    pub stats_window: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate::cmd_simulate(*a),
        Command::GenTrace(a) => cmd_gen_trace(a),
        Command::SolveDemotion(a) => solve::cmd_solve_demotion(a, &mut std::io::stdout().lock()),
        Command::Report(a) => report::cmd_report(a),
    }
}

pub fn cmd_gen_trace(args: GenTraceArgs) -> Result<()> {
    let params = args.synthetic.to_params(&Default::default());
    let trace = generate_synthetic_trace(&params)?;
    if args.out == Path::new("-") {
        write_trace(std::io::stdout().lock(), &trace)?;
    } else {
        let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let mut w = BufWriter::new(file);
        write_trace(&mut w, &trace)?;
        w.flush()?;
    }
    if let Some(window) = args.stats_window {
        let stats = trace_stats(&trace, window)?;
        eprintln!("{}", serde_json::to_string(&stats)?);
    }
    Ok(())
}

/// `--out`, then the config file, then `RAMZZZ_OUT_DIR`, then `fallback`.
pub fn out_dir(flag: Option<PathBuf>, fallback: &str) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(fallback))
}
