//! Trace-driven simulation of rank power states under the comparison
//! policies.
//!
//! Time is virtual: each access arrives at its trace cycle plus the stall
//! accumulated so far (resynchronization, remap lookups, waits behind a
//! migration). Queueing behind another request on a busy rank delays the
//! request but does not stall the trace. Slots start every `slot_cycles`
//! virtual cycles; every `slots_per_epoch`-th slot starts with migration.

mod metrics;
mod rank;
mod sim;

use std::{fmt, str::FromStr};

use serde::{Deserialize, Serialize};

use crate::{
    arch::{ArchError, DramArchSpec},
    demotion::{DemotionError, Objective},
    idlehist::HistError,
    placement::{MigrationCost, PlacementError},
    trace::MemoryAccess,
};

pub use metrics::{
    compute_ed2, full_system_energy, system_from_normalized, DelayBreakdown, NormalizedMetrics, RankMetrics, SimMetrics,
    SlotHistograms, SlotRecord, SystemMetrics,
};
pub use rank::OthersTime;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("page {page} outside the footprint of {pages} pages")]
    PageOutOfRange { page: u64, pages: u64 },
    #[error("the rzsd policy needs a low-power state")]
    MissingRzsdState,
    #[error("`{0}` is not a low-power state of the architecture")]
    UnknownState(String),
    #[error("no baseline run to normalize against")]
    MissingBaseline,
    #[error("memory power ratio {0} outside (0, 1)")]
    RatioOutOfRange(f64),
    #[error("simulation invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Demotion(#[from] DemotionError),
    #[error(transparent)]
    Hist(#[from] HistError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Never demote, never migrate.
    Base,
    /// Migration plus per-slot configurations solved on the slot's actual
    /// histogram.
    Oracle,
    /// Migration plus predicted adaptive demotion.
    Ramzzz,
    /// Adaptive demotion without migration.
    Rzsp,
    /// Migration plus a single pre-selected low-power state.
    Rzsd,
}

impl Policy {
    pub const ALL: [Policy; 5] = [Policy::Base, Policy::Oracle, Policy::Ramzzz, Policy::Rzsp, Policy::Rzsd];

    pub fn migrates(self) -> bool {
        matches!(self, Policy::Oracle | Policy::Ramzzz | Policy::Rzsd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Base => "base",
            Policy::Oracle => "oracle",
            Policy::Ramzzz => "ramzzz",
            Policy::Rzsp => "rzsp",
            Policy::Rzsd => "rzsd",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| format!("unknown policy `{s}` (expected base, oracle, ramzzz, rzsp or rzsd)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub migration: MigrationCost,
    /// Remap-table lookup, charged only when the rank has no queued request.
    pub remap_lookup_cycles: u64,
    /// MQ bookkeeping energy per access (ACT-power x cycles).
    pub mq_access_energy: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { migration: MigrationCost::default(), remap_lookup_cycles: 4, mq_access_energy: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub slot_cycles: u64,
    pub slots_per_epoch: u64,
    pub delay_budget_fraction: f64,
    pub ranks: usize,
    pub capacity_pages: usize,
    pub objective: Objective,
    pub policy: Policy,
    /// Low-power state for RZ-SD: a state name or its index (1 = shallowest).
    pub rzsd_state: Option<String>,
    /// Per-access service time `g` in cycles.
    pub access_latency: u64,
    pub costs: CostModel,
    pub mq_queues: usize,
    /// MQ expiration lifetime; defaults to one slot.
    pub mq_lifetime: Option<u64>,
    pub exponential_search: bool,
    /// Nominal trace length; defaults to one past the last access cycle.
    pub trace_cycles: Option<u64>,
    /// Keep predicted and actual histograms in each slot record.
    pub record_histograms: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            slot_cycles: 100_000_000,
            slots_per_epoch: 10,
            delay_budget_fraction: 0.04,
            ranks: 8,
            capacity_pages: 1 << 18,
            objective: Objective::Ed2,
            policy: Policy::Ramzzz,
            rzsd_state: None,
            access_latency: 200,
            costs: CostModel::default(),
            mq_queues: crate::mq::DEFAULT_QUEUES,
            mq_lifetime: None,
            exponential_search: false,
            trace_cycles: None,
            record_histograms: false,
        }
    }
}

impl SimParams {
    /// Smaller slot for quick runs: `10^6`-cycle slots, 10 slots per epoch.
    pub fn desk_scale() -> Self {
        Self { slot_cycles: 1_000_000, ..Self::default() }
    }

    pub fn validate(&self, spec: &DramArchSpec) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidParams(m.into()));
        if self.slot_cycles == 0 {
            return bad("slot_cycles must be positive");
        }
        if self.slots_per_epoch == 0 {
            return bad("slots_per_epoch must be positive");
        }
        if !(self.delay_budget_fraction >= 0.0 && self.delay_budget_fraction < 1.0) {
            return bad("delay_budget_fraction must lie in [0, 1)");
        }
        if self.ranks == 0 || self.capacity_pages == 0 {
            return bad("ranks and capacity_pages must be positive");
        }
        if self.access_latency == 0 {
            return bad("access_latency must be positive");
        }
        if self.mq_queues == 0 {
            return bad("mq_queues must be positive");
        }
        if self.policy == Policy::Rzsd {
            self.rzsd_state_index(spec)?;
        }
        Ok(())
    }

    /// Power-state index (1-based, ACT = 0) of the RZ-SD state.
    pub fn rzsd_state_index(&self, spec: &DramArchSpec) -> Result<usize, EngineError> {
        let name = self.rzsd_state.as_deref().ok_or(EngineError::MissingRzsdState)?;
        let index = match name.parse::<usize>() {
            Ok(i) => i,
            Err(_) => spec.state_index(name).ok_or_else(|| EngineError::UnknownState(name.to_string()))?,
        };
        if index == 0 || index >= spec.states.len() {
            return Err(EngineError::UnknownState(name.to_string()));
        }
        Ok(index)
    }

    pub fn delay_budget(&self) -> f64 {
        self.delay_budget_fraction * self.slot_cycles as f64
    }

    pub fn footprint_pages(&self) -> u64 {
        (self.ranks as u64).saturating_mul(self.capacity_pages as u64)
    }
}

/// Runs one policy over `trace`.
pub fn run_simulation(trace: &[MemoryAccess], spec: &DramArchSpec, params: &SimParams) -> Result<SimMetrics, EngineError> {
    run_with_options(trace, spec, params, false).map(|(m, _)| m)
}

/// Per-rank `(from, to)` power state transitions.
pub type TransitionLog = Vec<Vec<(usize, usize)>>;

/// Like [`run_simulation`], also returning every rank's `(from, to)` power
/// state transitions.
pub fn run_traced(
    trace: &[MemoryAccess],
    spec: &DramArchSpec,
    params: &SimParams,
) -> Result<(SimMetrics, TransitionLog), EngineError> {
    run_with_options(trace, spec, params, true)
}

fn run_with_options(
    trace: &[MemoryAccess],
    spec: &DramArchSpec,
    params: &SimParams,
    trace_transitions: bool,
) -> Result<(SimMetrics, TransitionLog), EngineError> {
    spec.validate()?;
    params.validate(spec)?;
    let pages = params.footprint_pages();
    if let Some(a) = trace.iter().find(|a| a.page >= pages) {
        return Err(EngineError::PageOutOfRange { page: a.page, pages });
    }
    if trace.windows(2).any(|w| w[1].cycle < w[0].cycle) {
        return Err(EngineError::InvalidParams("trace cycles must be non-decreasing".into()));
    }
    sim::Simulator::new(trace, spec, params, trace_transitions)?.run()
}
