//! `solve-demotion`: one-shot access to the timeout solver.

use std::{fs::File, io::Write, path::PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use ramzzz_core::{
    arch::load_arch_spec,
    demotion::{exhaustive_config, greedy_config, SolveOptions, Solution},
    ChainModel, Objective, SparseHistogram,
};
use serde::Deserialize;

use crate::config::parse_count;

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Histogram CSV with header `length,count`.
    #[arg(long)]
    pub hist: PathBuf,
    /// Built-in architecture name or JSON spec file.
    #[arg(long, default_value = "ddr3")]
    pub arch: String,
    /// Slot length in cycles.
    #[arg(long, value_parser = parse_count, default_value = "1e8")]
    pub slot: u64,
    /// Delay budget as a fraction of the slot.
    #[arg(long, default_value_t = 0.04)]
    pub budget: f64,
    #[arg(long, default_value = "ed2")]
    pub objective: Objective,
    /// Search timeouts on the power-of-two ladder.
    #[arg(long)]
    pub exponential_search: bool,
    /// Use the exhaustive solver instead of the greedy one.
    #[arg(long)]
    pub exhaustive: bool,
    /// Print the solution as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Deserialize)]
struct Bucket {
    length: u64,
    count: f64,
}

pub fn read_histogram(path: &PathBuf, slot: u64) -> Result<SparseHistogram> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let mut pairs = Vec::new();
    for row in rdr.deserialize() {
        let b: Bucket = row.with_context(|| format!("reading {}", path.display()))?;
        if b.length == 0 || b.length > slot {
            anyhow::bail!("idle length {} outside 1..={slot}", b.length);
        }
        if !(b.count >= 0.0) {
            anyhow::bail!("negative count for length {}", b.length);
        }
        pairs.push((b.length, b.count));
    }
    Ok(SparseHistogram::from_pairs(slot, pairs))
}

pub fn solve(args: &SolveArgs) -> Result<(ChainModel, Vec<String>, Solution)> {
    let spec = load_arch_spec(&args.arch)?;
    let hist = read_histogram(&args.hist, args.slot)?;
    let model = ChainModel::from_spec(&spec);
    let mut opts = SolveOptions::new(args.budget * args.slot as f64, args.objective, args.slot as f64);
    opts.exponential = args.exponential_search;
    let sol = if args.exhaustive {
        exhaustive_config(&hist, &model, &opts)?
    } else {
        greedy_config(&hist, &model, &opts)?
    };
    let names = spec.states[1..].iter().map(|s| s.name.clone()).collect();
    Ok((model, names, sol))
}

pub fn cmd_solve_demotion<W: Write>(args: SolveArgs, out: &mut W) -> Result<()> {
    let (_, names, sol) = solve(&args)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string(&sol)?)?;
        return Ok(());
    }
    for (name, t) in names.iter().zip(&sol.config.timeouts) {
        match t {
            Some(t) => writeln!(out, "{name} {t}")?,
            None => writeln!(out, "{name} disabled")?,
        }
    }
    writeln!(out, "energy {}", sol.energy)?;
    writeln!(out, "delay {}", sol.delay)?;
    writeln!(out, "objective {}", sol.objective)?;
    Ok(())
}
