//! Experiment configuration shared by flags and JSON config files.
//!
//! Every flag of `simulate` has a config-file key of the same kebab-case
//! name; flags given on the command line win.

use std::path::PathBuf;

use clap::Args;
use ramzzz_core::{Objective, Policy, SyntheticTraceParams};
use serde::{Deserialize, Deserializer, Serialize};

/// Parses a cycle or page count: `1000000`, `1_000_000`, `1e6`, `2.5e7`,
/// `4k`, `10M`, `1G`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    let (num, scale) = match t.chars().last() {
        Some('k' | 'K') => (&t[..t.len() - 1], 1e3),
        Some('m' | 'M') => (&t[..t.len() - 1], 1e6),
        Some('g' | 'G') => (&t[..t.len() - 1], 1e9),
        _ => (t.as_str(), 1.0),
    };
    if scale == 1.0 {
        if let Ok(v) = num.parse::<u64>() {
            return Ok(v);
        }
    }
    let v = num.parse::<f64>().map_err(|_| format!("`{s}` is not a count"))? * scale;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("`{s}` is not a whole non-negative count"));
    }
    Ok(v as u64)
}

fn de_count<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Float(f64),
        Text(String),
    }
    let parsed = match Option::<Raw>::deserialize(d)? {
        None => return Ok(None),
        Some(Raw::Int(v)) => Ok(v),
        Some(Raw::Float(v)) => parse_count(&v.to_string()),
        Some(Raw::Text(s)) => parse_count(&s),
    };
    parsed.map(Some).map_err(serde::de::Error::custom)
}

/// Synthetic workload knobs; unset fields fall back to the generator defaults.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SyntheticArgs {
    /// Trace length in cycles.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub cycles: Option<u64>,
    /// Number of distinct pages.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub pages: Option<u64>,
    /// Fraction of pages that are hot.
    #[arg(long)]
    pub hot_fraction: Option<f64>,
    /// Share of accesses going to hot pages.
    #[arg(long)]
    pub hot_share: Option<f64>,
    /// Expected accesses per cycle.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Cycles between hot-set shifts (0 = fixed).
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub phase_length: Option<u64>,
    #[arg(long)]
    pub write_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SyntheticArgs {
    pub fn merge(self, file: Self) -> Self {
        Self {
            cycles: self.cycles.or(file.cycles),
            pages: self.pages.or(file.pages),
            hot_fraction: self.hot_fraction.or(file.hot_fraction),
            hot_share: self.hot_share.or(file.hot_share),
            rate: self.rate.or(file.rate),
            phase_length: self.phase_length.or(file.phase_length),
            write_fraction: self.write_fraction.or(file.write_fraction),
            seed: self.seed.or(file.seed),
        }
    }

    pub fn to_params(&self, base: &SyntheticTraceParams) -> SyntheticTraceParams {
        SyntheticTraceParams {
            total_cycles: self.cycles.unwrap_or(base.total_cycles),
            num_pages: self.pages.unwrap_or(base.num_pages),
            hot_fraction: self.hot_fraction.unwrap_or(base.hot_fraction),
            hot_access_share: self.hot_share.unwrap_or(base.hot_access_share),
            access_rate: self.rate.unwrap_or(base.access_rate),
            phase_length: self.phase_length.unwrap_or(base.phase_length),
            write_fraction: self.write_fraction.unwrap_or(base.write_fraction),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Architectures: built-in names (ddr3, ddr2, lpddr2) or JSON spec files.
    #[arg(long, value_delimiter = ',')]
    pub arch: Option<Vec<String>>,
    /// Policies: base, oracle, ramzzz, rzsp, rzsd.
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<Policy>>,
    /// Low-power state for rzsd, by name or 1-based index.
    #[arg(long)]
    pub rzsd_state: Option<String>,
    /// Trace CSV (optionally gzipped); omit to use a synthetic trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub synthetic: SyntheticArgs,
    /// Slot length in cycles.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub slot: Option<u64>,
    /// Slots per migration epoch.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub epoch_slots: Option<u64>,
    /// Delay budget as a fraction of the slot; a list runs a sweep.
    #[arg(long, value_delimiter = ',')]
    pub delay_budget: Option<Vec<f64>>,
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Pages per rank; defaults to an even split of the trace footprint.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub capacity: Option<u64>,
    /// Solver objective: energy or ed2.
    #[arg(long)]
    pub objective: Option<Objective>,
    /// Per-access service time in cycles.
    #[arg(long, value_parser = parse_count)]
    #[serde(deserialize_with = "de_count")]
    pub latency: Option<u64>,
    /// Search timeouts on the power-of-two ladder.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exponential_search: Option<bool>,
    /// Keep predicted and actual histograms in the result JSON.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub record_histograms: Option<bool>,
    /// Memory share of system power for the full-system columns.
    #[arg(long)]
    pub mem_power_ratio: Option<f64>,
    /// Output directory (default: $RAMZZZ_OUT_DIR, else `results`).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Field-wise `self` over `file`.
    pub fn merge(self, file: Self) -> Self {
        Self {
            arch: self.arch.or(file.arch),
            policy: self.policy.or(file.policy),
            rzsd_state: self.rzsd_state.or(file.rzsd_state),
            trace: self.trace.or(file.trace),
            synthetic: self.synthetic.merge(file.synthetic),
            slot: self.slot.or(file.slot),
            epoch_slots: self.epoch_slots.or(file.epoch_slots),
            delay_budget: self.delay_budget.or(file.delay_budget),
            ranks: self.ranks.or(file.ranks),
            capacity: self.capacity.or(file.capacity),
            objective: self.objective.or(file.objective),
            latency: self.latency.or(file.latency),
            exponential_search: self.exponential_search.or(file.exponential_search),
            record_histograms: self.record_histograms.or(file.record_histograms),
            mem_power_ratio: self.mem_power_ratio.or(file.mem_power_ratio),
            out: self.out.or(file.out),
        }
    }
}
