//! `report`: CSV tables from result JSON files.

use std::{
    fs,
    io::Write,
    path::{Path, PathBuf},
};

use anyhow::{Context, Result};
use clap::Args;
use ramzzz_core::{
    engine::{compute_ed2, full_system_energy, SimMetrics},
    Policy,
};
use serde::Serialize;

use crate::out_dir;

pub const DEFAULT_MEM_POWER_RATIO: f64 = 0.4;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result JSON files or directories holding them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory (default: $RAMZZZ_OUT_DIR, else `report`).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Memory share of system power for the full-system columns.
    #[arg(long, default_value_t = DEFAULT_MEM_POWER_RATIO)]
    pub mem_power_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub file: String,
    pub arch: String,
    pub policy: Policy,
    pub rzsd_state: Option<String>,
    pub delay_budget: f64,
    pub energy: f64,
    pub exec_time: u64,
    pub ed2: f64,
    pub norm_energy: Option<f64>,
    pub norm_exec_time: Option<f64>,
    pub norm_ed2: Option<f64>,
    pub system_energy: Option<f64>,
    pub system_ed2: Option<f64>,
    pub migrated_pages: u64,
    pub mean_prediction_error: Option<f64>,
    #[serde(skip)]
    pub requested: bool,
}

/// Baseline for `m`: a BASE run on the same architecture and trace, with the
/// same budget when there is one.
fn baseline<'a>(m: &SimMetrics, all: &'a [(String, &'a SimMetrics)]) -> Option<&'a SimMetrics> {
    let same_run = |b: &SimMetrics| {
        b.policy == Policy::Base
            && b.arch == m.arch
            && b.accesses == m.accesses
            && b.params.slot_cycles == m.params.slot_cycles
            && b.params.ranks == m.params.ranks
    };
    let candidates: Vec<&SimMetrics> = all.iter().map(|(_, b)| *b).filter(|b| same_run(b)).collect();
    candidates
        .iter()
        .find(|b| b.params.delay_budget_fraction == m.params.delay_budget_fraction)
        .or(candidates.first())
        .copied()
}

pub fn summary_rows(all: &[(String, &SimMetrics)], mem_power_ratio: f64) -> Result<Vec<SummaryRow>> {
    all.iter()
        .map(|(file, m)| {
            let base = baseline(m, all);
            let norm = base.map(|b| compute_ed2(m, Some(b))).transpose()?;
            let system = base.map(|b| full_system_energy(m, b, mem_power_ratio)).transpose()?;
            Ok(SummaryRow {
                file: file.clone(),
                arch: m.arch.clone(),
                policy: m.policy,
                rzsd_state: m.params.rzsd_state.clone(),
                delay_budget: m.params.delay_budget_fraction,
                energy: m.total_energy,
                exec_time: m.exec_time,
                ed2: m.ed2,
                norm_energy: norm.map(|n| n.energy),
                norm_exec_time: norm.map(|n| n.exec_time),
                norm_ed2: norm.map(|n| n.ed2),
                system_energy: system.map(|s| s.energy),
                system_ed2: system.map(|s| s.ed2),
                migrated_pages: m.migrated_pages,
                mean_prediction_error: m.mean_prediction_error,
                requested: !file.ends_with(".baseline.json"),
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ResidencyRow<'a> {
    file: &'a str,
    arch: &'a str,
    policy: Policy,
    state: &'a str,
    fraction: f64,
}

#[derive(Serialize)]
struct DelayRow<'a> {
    file: &'a str,
    arch: &'a str,
    policy: Policy,
    resync: u64,
    migration: u64,
    remap: u64,
    total: u64,
    /// Total delay over the undelayed run time.
    fraction: f64,
}

#[derive(Serialize)]
struct SlotRow<'a> {
    file: &'a str,
    policy: Policy,
    slot: u64,
    prediction_error: Option<f64>,
    resync_delay: u64,
    migrated_pages: usize,
}

#[derive(Serialize)]
struct MqRow<'a> {
    file: &'a str,
    policy: Policy,
    level: usize,
    pages: usize,
    mean_frequency: Option<f64>,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// All report tables as `(file name, CSV bytes)`, in a fixed order.
pub fn render(all: &[(String, &SimMetrics)], mem_power_ratio: f64) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut summary = Vec::new();
    write_summary(&mut summary, &summary_rows(all, mem_power_ratio)?)?;

    let residency = csv_bytes(all.iter().flat_map(|(file, m)| {
        let names = m.state_names.iter().map(String::as_str).chain(std::iter::once("Others"));
        names.zip(m.residency_fractions()).map(move |(state, fraction)| ResidencyRow {
            file,
            arch: &m.arch,
            policy: m.policy,
            state,
            fraction,
        })
    }))?;

    let delay = csv_bytes(all.iter().map(|(file, m)| {
        let total = m.delay.total();
        let undelayed = m.exec_time.saturating_sub(total);
        DelayRow {
            file,
            arch: &m.arch,
            policy: m.policy,
            resync: m.delay.resync,
            migration: m.delay.migration,
            remap: m.delay.remap,
            total,
            fraction: if undelayed > 0 { total as f64 / undelayed as f64 } else { 0.0 },
        }
    }))?;

    let slots = csv_bytes(all.iter().flat_map(|(file, m)| {
        m.slots.iter().map(move |s| SlotRow {
            file,
            policy: m.policy,
            slot: s.slot,
            prediction_error: s.prediction_error,
            resync_delay: s.resync_delay,
            migrated_pages: s.migrated_pages,
        })
    }))?;

    let mq = csv_bytes(all.iter().flat_map(|(file, m)| {
        m.mq_levels.iter().map(move |l| MqRow {
            file,
            policy: m.policy,
            level: l.level,
            pages: l.pages,
            mean_frequency: l.mean_frequency,
        })
    }))?;

    Ok(vec![
        ("summary.csv", summary),
        ("residency.csv", residency),
        ("delay.csv", delay),
        ("slots.csv", slots),
        ("mq_levels.csv", mq),
    ])
}

/// Expands directories to their `*.json` files; sorted by path.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for entry in fs::read_dir(p).with_context(|| format!("listing {}", p.display()))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

pub fn load_results(files: &[PathBuf]) -> Result<Vec<(String, SimMetrics)>> {
    files
        .iter()
        .map(|path| {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let m: SimMetrics = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((name, m))
        })
        .collect()
}

pub fn cmd_report(args: ReportArgs) -> Result<()> {
    let files = collect_inputs(&args.inputs)?;
    if files.is_empty() {
        anyhow::bail!("no result files found");
    }
    let loaded = load_results(&files)?;
    let all: Vec<(String, &SimMetrics)> = loaded.iter().map(|(f, m)| (f.clone(), m)).collect();
    let dir = out_dir(args.out, "report");
    write_tables(&dir, &render(&all, args.mem_power_ratio)?)?;
    println!("{} results -> {}", all.len(), dir.display());
    Ok(())
}

fn write_tables(dir: &Path, tables: &[(&str, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in tables {
        fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}
