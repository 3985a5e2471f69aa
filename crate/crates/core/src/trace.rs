//! Memory-access traces: CSV ingestion, synthetic generation and summary
//! statistics.

use std::{
    collections::BTreeSet,
    io::{BufRead, BufReader, Read, Write},
};

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

pub const TRACE_HEADER: &str = "cycle,page,op";

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: cycle {cycle} precedes previous cycle {previous}")]
    NonMonotone { line: u64, cycle: u64, previous: u64 },
    #[error("invalid synthetic trace parameters: {0}")]
    InvalidParams(String),
    #[error("trace is empty")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemoryAccess {
    pub cycle: u64,
    pub page: u64,
    pub is_write: bool,
}

impl MemoryAccess {
    pub fn new(cycle: u64, page: u64, is_write: bool) -> Self {
        Self { cycle, page, is_write }
    }
}

/// Reads a CSV trace; gzip input is detected from its magic bytes.
pub fn parse_trace<R: Read>(stream: R) -> Result<Vec<MemoryAccess>, TraceError> {
    let mut reader = BufReader::new(stream);
    let is_gzip = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    if is_gzip {
        parse_plain(GzDecoder::new(reader))
    } else {
        parse_plain(reader)
    }
}

fn parse_plain<R: Read>(stream: R) -> Result<Vec<MemoryAccess>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(stream);
    let mut out = Vec::new();
    let mut previous: Option<u64> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TraceError::Malformed {
            line: idx as u64 + 1,
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.get(0) == Some("cycle") {
            continue;
        }
        let malformed = |reason: String| TraceError::Malformed { line, reason };
        if record.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", record.len())));
        }
        let cycle: u64 = record[0]
            .parse()
            .map_err(|_| malformed(format!("bad cycle `{}`", &record[0])))?;
        let page: u64 = record[1]
            .parse()
            .map_err(|_| malformed(format!("bad page `{}`", &record[1])))?;
        let is_write = match &record[2] {
            "R" | "r" => false,
            "W" | "w" => true,
            other => return Err(malformed(format!("bad op `{other}` (expected R or W)"))),
        };
        if let Some(prev) = previous {
            if cycle < prev {
                return Err(TraceError::NonMonotone { line, cycle, previous: prev });
            }
        }
        previous = Some(cycle);
        out.push(MemoryAccess { cycle, page, is_write });
    }
    Ok(out)
}

pub fn write_trace<W: Write>(mut out: W, trace: &[MemoryAccess]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for a in trace {
        writeln!(out, "{},{},{}", a.cycle, a.page, if a.is_write { 'W' } else { 'R' })?;
    }
    Ok(())
}

/// Parameters of the synthetic hot/cold Poisson workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraceParams {
    pub total_cycles: u64,
    pub num_pages: u64,
    /// Fraction of pages that are hot.
    pub hot_fraction: f64,
    /// Share of all accesses that go to the hot pages.
    pub hot_access_share: f64,
    /// Expected accesses per cycle over the whole footprint.
    pub access_rate: f64,
    /// Cycles between shifts of the hot set; 0 keeps it fixed.
    pub phase_length: u64,
    pub write_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticTraceParams {
    fn default() -> Self {
        Self {
            total_cycles: 10_000_000,
            num_pages: 1000,
            hot_fraction: 0.1,
            hot_access_share: 0.9,
            access_rate: 0.001,
            phase_length: 0,
            write_fraction: 0.3,
            seed: 1,
        }
    }
}

impl SyntheticTraceParams {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::InvalidParams(m.to_owned()));
        if self.num_pages == 0 {
            return bad("num_pages must be positive");
        }
        if !(self.hot_fraction > 0.0 && self.hot_fraction < 1.0) {
            return bad("hot_fraction must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.hot_access_share) {
            return bad("hot_access_share must lie in [0, 1]");
        }
        if !(self.access_rate >= 0.0 && self.access_rate.is_finite()) {
            return bad("access_rate must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad("write_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn hot_pages(&self) -> u64 {
        ((self.num_pages as f64 * self.hot_fraction).round() as u64).clamp(1, self.num_pages)
    }

    /// Hot page set during the phase containing `cycle`: a contiguous block
    /// of page ids that rotates by its own size at every phase change.
    pub fn is_hot(&self, page: u64, cycle: u64) -> bool {
        let hot = self.hot_pages();
        let phase = cycle.checked_div(self.phase_length).unwrap_or(0);
        let start = (phase * hot) % self.num_pages;
        (page + self.num_pages - start) % self.num_pages < hot
    }
}

/// Generates a superposition of per-page Poisson processes: the global
/// stream is Poisson with `access_rate`, each access thinned onto the hot or
/// the cold set, then uniformly onto a page of that set.
pub fn generate_synthetic_trace(params: &SyntheticTraceParams) -> Result<Vec<MemoryAccess>, TraceError> {
    params.validate()?;
    let mut out = Vec::new();
    if params.access_rate == 0.0 || params.total_cycles == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let gap = Exp::new(params.access_rate).expect("positive rate");
    let hot = params.hot_pages();
    let cold = params.num_pages - hot;
    let mut t = 0.0f64;
    loop {
        t += gap.sample(&mut rng);
        let cycle = t.floor() as u64;
        if cycle >= params.total_cycles {
            break;
        }
        let phase = cycle.checked_div(params.phase_length).unwrap_or(0);
        let start = (phase * hot) % params.num_pages;
        let offset = if cold == 0 || rng.random::<f64>() < params.hot_access_share {
            rng.random_range(0..hot)
        } else {
            hot + rng.random_range(0..cold)
        };
        let page = (start + offset) % params.num_pages;
        let is_write = rng.random::<f64>() < params.write_fraction;
        out.push(MemoryAccess { cycle, page, is_write });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub accesses: u64,
    pub footprint_pages: u64,
    pub windows: u64,
    pub mean_accesses_per_window: f64,
    pub stdev_over_mean: f64,
}

/// Footprint and per-window access statistics. The trace spans windows
/// `0..=last_cycle / window`.
pub fn trace_stats(trace: &[MemoryAccess], window: u64) -> Result<TraceStats, TraceError> {
    let last = trace.last().ok_or(TraceError::Empty)?;
    if window == 0 {
        return Err(TraceError::InvalidParams("window must be positive".into()));
    }
    let windows = last.cycle / window + 1;
    let mut counts = vec![0u64; windows as usize];
    let mut pages = BTreeSet::new();
    for a in trace {
        counts[(a.cycle / window) as usize] += 1;
        pages.insert(a.page);
    }
    let n = windows as f64;
    let mean = trace.len() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(TraceStats {
        accesses: trace.len() as u64,
        footprint_pages: pages.len() as u64,
        windows,
        mean_accesses_per_window: mean,
        stdev_over_mean: var.sqrt() / mean,
    })
}
