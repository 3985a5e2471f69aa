use serde::{Deserialize, Serialize};

use super::{rank::OthersTime, EngineError, Policy, SimParams};
use crate::{demotion::DemotionConfig, idlehist::SparseHistogram, mq::MqLevel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub resync: u64,
    pub migration: u64,
    pub remap: u64,
}

impl DelayBreakdown {
    pub fn total(&self) -> u64 {
        self.resync + self.migration + self.remap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub background_energy: f64,
    pub resync_energy: f64,
    /// Idle time per power state, ACT first.
    pub residency: Vec<u64>,
    pub others: OthersTime,
    pub accesses: u64,
    pub resyncs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotHistograms {
    pub predicted: Vec<SparseHistogram>,
    pub actual: Vec<SparseHistogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    /// Log2-binned L1 distance between predicted and actual histograms,
    /// summed over ranks and divided by the actual period count.
    pub prediction_error: Option<f64>,
    /// Resynchronization stall incurred during the slot.
    pub resync_delay: u64,
    /// Pages migrated at the start of the slot.
    pub migrated_pages: usize,
    pub configs: Vec<DemotionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histograms: Option<SlotHistograms>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub policy: Policy,
    pub arch: String,
    pub state_names: Vec<String>,
    pub params: SimParams,
    pub accesses: u64,
    pub total_energy: f64,
    pub background_energy: f64,
    pub resync_energy: f64,
    pub migration_energy: f64,
    pub mq_energy: f64,
    pub delay: DelayBreakdown,
    /// Trace span plus stalls (or the last busy cycle, if later).
    pub exec_time: u64,
    /// Idle residency per power state summed over ranks.
    pub residency: Vec<u64>,
    pub others: OthersTime,
    pub ranks: Vec<RankMetrics>,
    pub migrated_pages: u64,
    pub slots: Vec<SlotRecord>,
    /// Mean prediction error over slots after the first epoch.
    pub mean_prediction_error: Option<f64>,
    pub ed2: f64,
    pub mq_levels: Vec<MqLevel>,
}

impl SimMetrics {
    /// Residency fractions (states, then Others) per rank-time.
    pub fn residency_fractions(&self) -> Vec<f64> {
        let total = (self.exec_time * self.ranks.len() as u64) as f64;
        self.residency
            .iter()
            .chain(std::iter::once(&self.others.total()))
            .map(|&t| if total > 0.0 { t as f64 / total } else { 0.0 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub energy: f64,
    pub exec_time: f64,
    pub ed2: f64,
}

/// `energy * exec_time^2` relative to a baseline run.
pub fn compute_ed2(metrics: &SimMetrics, baseline: Option<&SimMetrics>) -> Result<NormalizedMetrics, EngineError> {
    let base = baseline.ok_or(EngineError::MissingBaseline)?;
    if !(base.total_energy > 0.0) || base.exec_time == 0 {
        return Err(EngineError::MissingBaseline);
    }
    Ok(NormalizedMetrics {
        energy: metrics.total_energy / base.total_energy,
        exec_time: metrics.exec_time as f64 / base.exec_time as f64,
        ed2: metrics.ed2 / base.ed2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub energy: f64,
    pub ed2: f64,
}

/// Whole-system energy when memory draws `mem_power_ratio` of system power
/// and everything else scales with execution time.
pub fn system_from_normalized(n: &NormalizedMetrics, mem_power_ratio: f64) -> Result<SystemMetrics, EngineError> {
    if !(mem_power_ratio > 0.0 && mem_power_ratio < 1.0) {
        return Err(EngineError::RatioOutOfRange(mem_power_ratio));
    }
    let energy = mem_power_ratio * n.energy + (1.0 - mem_power_ratio) * n.exec_time;
    Ok(SystemMetrics { energy, ed2: energy * n.exec_time * n.exec_time })
}

pub fn full_system_energy(metrics: &SimMetrics, baseline: &SimMetrics, mem_power_ratio: f64) -> Result<SystemMetrics, EngineError> {
    system_from_normalized(&compute_ed2(metrics, Some(baseline))?, mem_power_ratio)
}
