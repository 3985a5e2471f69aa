//! Idle-period histograms.
//!
//! [`IdleHistogram`] is the compact per-slot recorder: dense counters for
//! lengths up to `ceil(sqrt(T))` and a list of exact lengths for the longer
//! periods, of which a slot of `T` cycles can hold at most `sqrt(T)`.
//! [`SparseHistogram`] is the sorted `(length, weight)` form consumed by the
//! predictor and the demotion solver; its weights may be fractional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HistError {
    #[error("idle length {length} exceeds slot length {slot}")]
    TooLong { length: u64, slot: u64 },
    #[error("idle periods must be at least one cycle long")]
    ZeroLength,
    #[error("slot length must be positive")]
    EmptySlot,
}

pub fn ceil_sqrt(t: u64) -> u64 {
    let mut r = (t as f64).sqrt() as u64;
    while r * r < t {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= t {
        r -= 1;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdleHistogram {
    slot_cycles: u64,
    short_counts: Vec<u64>,
    long_lengths: Vec<u64>,
    /// Overflow for the (non-engine) case of more than `sqrt(T)` long periods.
    spill: BTreeMap<u64, u64>,
}

impl IdleHistogram {
    pub fn new(slot_cycles: u64) -> Result<Self, HistError> {
        if slot_cycles == 0 {
            return Err(HistError::EmptySlot);
        }
        let short = ceil_sqrt(slot_cycles);
        Ok(Self {
            slot_cycles,
            short_counts: vec![0; short as usize],
            long_lengths: Vec::with_capacity(short as usize),
            spill: BTreeMap::new(),
        })
    }

    pub fn slot_cycles(&self) -> u64 {
        self.slot_cycles
    }

    /// Longest length kept in the dense array.
    pub fn short_limit(&self) -> u64 {
        self.short_counts.len() as u64
    }

    pub fn record_idle(&mut self, length: u64) -> Result<(), HistError> {
        if length == 0 {
            return Err(HistError::ZeroLength);
        }
        if length > self.slot_cycles {
            return Err(HistError::TooLong { length, slot: self.slot_cycles });
        }
        if length <= self.short_limit() {
            self.short_counts[length as usize - 1] += 1;
        } else if self.long_lengths.len() < self.short_counts.len() {
            self.long_lengths.push(length);
        } else {
            *self.spill.entry(length).or_default() += 1;
        }
        Ok(())
    }

    /// Non-zero buckets in ascending length order.
    pub fn iter_buckets(&self) -> Vec<(u64, u64)> {
        let mut long: BTreeMap<u64, u64> = self.spill.clone();
        for &l in &self.long_lengths {
            *long.entry(l).or_default() += 1;
        }
        self.short_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u64 + 1, c))
            .chain(long)
            .collect()
    }

    pub fn total_periods(&self) -> u64 {
        self.short_counts.iter().sum::<u64>()
            + self.long_lengths.len() as u64
            + self.spill.values().sum::<u64>()
    }

    pub fn total_idle_cycles(&self) -> u64 {
        self.iter_buckets().iter().map(|(l, c)| l * c).sum()
    }

    /// Counters plus stored long lengths (plus spilled buckets).
    pub fn storage_len(&self) -> usize {
        self.short_counts.len() + self.long_lengths.len() + self.spill.len()
    }

    pub fn has_spilled(&self) -> bool {
        !self.spill.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.total_periods() == 0
    }

    pub fn reset(&mut self) {
        self.short_counts.iter_mut().for_each(|c| *c = 0);
        self.long_lengths.clear();
        self.spill.clear();
    }

    pub fn to_sparse(&self) -> SparseHistogram {
        SparseHistogram {
            slot_cycles: self.slot_cycles,
            buckets: self.iter_buckets().into_iter().map(|(l, c)| (l, c as f64)).collect(),
        }
    }
}

/// Sorted, strictly increasing lengths with positive weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseHistogram {
    pub slot_cycles: u64,
    pub buckets: Vec<(u64, f64)>,
}

impl SparseHistogram {
    pub fn empty(slot_cycles: u64) -> Self {
        Self { slot_cycles, buckets: Vec::new() }
    }

    /// Builds from unsorted entries, merging duplicates and dropping
    /// non-positive weights.
    pub fn from_pairs(slot_cycles: u64, pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        for (l, w) in pairs {
            *merged.entry(l).or_default() += w;
        }
        Self {
            slot_cycles,
            buckets: merged.into_iter().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn total_count(&self) -> f64 {
        self.buckets.iter().map(|(_, w)| w).sum()
    }

    /// `sum(weight * (length + busy))`: the slot time the histogram
    /// accounts for when every idle period is followed by `busy` cycles.
    pub fn occupied_time(&self, busy: u64) -> f64 {
        self.buckets.iter().map(|&(l, w)| w * (l + busy) as f64).sum()
    }

    pub fn distinct_lengths(&self) -> usize {
        self.buckets.len()
    }

    /// Weights aggregated into power-of-two bins: bin `k` covers
    /// `[2^k, 2^(k+1))`.
    pub fn log2_bins(&self) -> BTreeMap<u32, f64> {
        let mut bins = BTreeMap::new();
        for &(l, w) in &self.buckets {
            *bins.entry(63 - l.leading_zeros()).or_default() += w;
        }
        bins
    }

    /// L1 distance between the log2-binned forms of `self` (prediction) and
    /// `actual`, and the total weight of `actual`.
    pub fn binned_l1(&self, actual: &SparseHistogram) -> (f64, f64) {
        let p = self.log2_bins();
        let a = actual.log2_bins();
        let mut keys: Vec<u32> = p.keys().chain(a.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let l1 = keys
            .iter()
            .map(|k| (p.get(k).copied().unwrap_or(0.0) - a.get(k).copied().unwrap_or(0.0)).abs())
            .sum();
        (l1, actual.total_count())
    }
}
