//! `simulate`: runs the policy x arch x budget matrix and writes results.

use std::{
    fs::{self, File},
    io::{BufReader, Write},
    path::PathBuf,
};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use ramzzz_core::{
    arch::load_arch_spec,
    engine::{run_simulation, SimMetrics, SimParams},
    trace::{generate_synthetic_trace, parse_trace},
    DramArchSpec, MemoryAccess, Policy,
};

use crate::{config::ExperimentConfig, out_dir, report, UsageError};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub exp: ExperimentConfig,
}

pub struct RunResult {
    pub file: String,
    pub metrics: SimMetrics,
}

pub fn load_config(args: SimulateArgs) -> Result<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    Ok(args.exp.merge(file))
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let results = simulate(&cfg)?;
    let dir = out_dir(cfg.out.clone(), "results");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in &results {
        let path = dir.join(&r.file);
        fs::write(&path, serde_json::to_string_pretty(&r.metrics)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let metrics: Vec<(String, &SimMetrics)> = results.iter().map(|r| (r.file.clone(), &r.metrics)).collect();
    let ratio = cfg.mem_power_ratio.unwrap_or(report::DEFAULT_MEM_POWER_RATIO);
    let rows = report::summary_rows(&metrics, ratio)?;
    let mut summary = Vec::new();
    report::write_summary(&mut summary, &rows)?;
    fs::write(dir.join("summary.csv"), &summary)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<8} {:<8} {:>7} {:>10} {:>10} {:>10}", "arch", "policy", "budget", "energy", "time", "ed2")?;
    for row in rows.iter().filter(|r| r.requested) {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            out,
            "{:<8} {:<8} {:>7} {:>10} {:>10} {:>10}",
            row.arch,
            row.policy.name(),
            row.delay_budget,
            f(row.norm_energy),
            f(row.norm_exec_time),
            f(row.norm_ed2)
        )?;
    }
    writeln!(out, "results in {}", dir.display())?;
    Ok(())
}

/// Resolves the config and runs every job. BASE is always run so the others
/// can be normalized; it is marked unrequested when not asked for.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let policies = cfg.policy.clone().unwrap_or_else(|| vec![Policy::Base, Policy::Ramzzz]);
    if policies.is_empty() {
        return Err(UsageError("no policy given".into()).into());
    }
    if policies.contains(&Policy::Rzsd) && cfg.rzsd_state.is_none() {
        return Err(UsageError("--policy rzsd needs --rzsd-state".into()).into());
    }
    let archs = cfg.arch.clone().unwrap_or_else(|| vec!["ddr3".into()]);
    let specs: Vec<DramArchSpec> = archs.iter().map(|a| load_arch_spec(a)).collect::<Result<_, _>>()?;
    let budgets = cfg.delay_budget.clone().unwrap_or_else(|| vec![SimParams::default().delay_budget_fraction]);
    if budgets.is_empty() {
        return Err(UsageError("no delay budget given".into()).into());
    }

    let (trace, nominal) = load_trace(cfg)?;
    let base = base_params(cfg, &trace, nominal)?;

    let mut jobs: Vec<(usize, SimParams, bool)> = Vec::new();
    for (a, _) in specs.iter().enumerate() {
        for &b in &budgets {
            for &policy in std::iter::once(&Policy::Base).chain(&policies) {
                let requested = policies.contains(&policy);
                if policy == Policy::Base && jobs.iter().any(|(ja, jp, _)| *ja == a && jp.policy == Policy::Base && jp.delay_budget_fraction == b) {
                    continue;
                }
                let mut p = base.clone();
                p.policy = policy;
                p.delay_budget_fraction = b;
                p.rzsd_state = (policy == Policy::Rzsd).then(|| cfg.rzsd_state.clone()).flatten();
                p.validate(&specs[a])?;
                jobs.push((a, p, requested));
            }
        }
    }

    let results: Vec<Result<RunResult>> = jobs
        .par_iter()
        .map(|(a, p, requested)| {
            let spec = &specs[*a];
            let m = run_simulation(&trace, spec, p).with_context(|| format!("{} on {}", p.policy, spec.name))?;
            check_invariants(&m, spec)?;
            let state = p.rzsd_state.as_deref().map(|s| format!("-{s}")).unwrap_or_default();
            let tag = if *requested { "" } else { ".baseline" };
            let file = format!("{}-{}{state}-b{}{tag}.json", sanitize(&spec.name), p.policy, p.delay_budget_fraction);
            Ok(RunResult { file, metrics: m })
        })
        .collect();
    results.into_iter().collect()
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// The trace plus its nominal length when synthetic.
fn load_trace(cfg: &ExperimentConfig) -> Result<(Vec<MemoryAccess>, Option<u64>)> {
    match &cfg.trace {
        Some(path) => {
            if cfg.synthetic != Default::default() {
                return Err(UsageError("--trace cannot be combined with synthetic trace options".into()).into());
            }
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let trace = parse_trace(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
            Ok((trace, None))
        }
        None => {
            let params = cfg.synthetic.to_params(&Default::default());
            Ok((generate_synthetic_trace(&params)?, Some(params.total_cycles)))
        }
    }
}

fn base_params(cfg: &ExperimentConfig, trace: &[MemoryAccess], nominal: Option<u64>) -> Result<SimParams> {
    let mut p = SimParams::default();
    if let Some(v) = cfg.slot {
        p.slot_cycles = v;
    }
    if let Some(v) = cfg.epoch_slots {
        p.slots_per_epoch = v;
    }
    if let Some(v) = cfg.ranks {
        p.ranks = v;
    }
    if let Some(v) = cfg.objective {
        p.objective = v;
    }
    if let Some(v) = cfg.latency {
        p.access_latency = v;
    }
    p.exponential_search = cfg.exponential_search.unwrap_or(false);
    p.record_histograms = cfg.record_histograms.unwrap_or(false);
    p.trace_cycles = nominal;
    if p.ranks == 0 {
        bail!(UsageError("--ranks must be positive".into()));
    }
    let footprint = trace.iter().map(|a| a.page + 1).max().unwrap_or(0);
    p.capacity_pages = match cfg.capacity {
        Some(c) => usize::try_from(c).context("capacity too large")?,
        None => (footprint.div_ceil(p.ranks as u64)).max(1) as usize,
    };
    Ok(p)
}

/// Residency closure per rank and the energy breakdown adding up.
pub fn check_invariants(m: &SimMetrics, spec: &DramArchSpec) -> Result<()> {
    for (r, rank) in m.ranks.iter().enumerate() {
        let sum = rank.residency.iter().sum::<u64>() + rank.others.total();
        if sum != m.exec_time {
            bail!("rank {r}: residency {sum} != exec time {}", m.exec_time);
        }
    }
    let idle: f64 = m.residency.iter().zip(&spec.states).map(|(&t, s)| t as f64 * s.normalized_power).sum();
    let closure = idle
        + (m.others.service + m.others.remap) as f64 * spec.act_power()
        + m.resync_energy
        + m.migration_energy
        + m.mq_energy;
    if (closure - m.total_energy).abs() > 1e-9 * m.total_energy.max(1.0) {
        bail!("energy breakdown {closure} != total {}", m.total_energy);
    }
    Ok(())
}
