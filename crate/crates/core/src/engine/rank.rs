//! Per-rank power state machine and bookkeeping.

use serde::{Deserialize, Serialize};

use crate::{demotion::DemotionConfig, idlehist::IdleHistogram};

/// Non-idle rank time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OthersTime {
    pub service: u64,
    pub resync: u64,
    pub migration: u64,
    pub remap: u64,
}

impl OthersTime {
    pub fn total(&self) -> u64 {
        self.service + self.resync + self.migration + self.remap
    }

    pub(crate) fn add(&mut self, o: &OthersTime) {
        self.service += o.service;
        self.resync += o.resync;
        self.migration += o.migration;
        self.remap += o.remap;
    }
}

/// Static per-state numbers, indexed by power state (0 = ACT).
#[derive(Clone, Debug)]
pub(crate) struct StateTable {
    pub power: Vec<f64>,
    pub resync_cycles: Vec<u64>,
    pub resync_energy: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct RankSim {
    /// Power state index, 0 = ACT.
    pub state: usize,
    pub busy_until: u64,
    pub migrating_until: u64,
    /// Start of the current (or next) idle period.
    pub idle_start: u64,
    /// Residency is accounted up to this time.
    pub acct: u64,
    pub config: DemotionConfig,
    pub hist: IdleHistogram,
    pub residency: Vec<u64>,
    pub others: OthersTime,
    pub resync_energy: f64,
    pub resyncs: u64,
    pub accesses: u64,
    /// Every `(from, to)` state change, when tracing is on.
    pub transitions: Option<Vec<(usize, usize)>>,
}

/// Result of waking a rank for a request.
pub(crate) struct Wake {
    pub resync: u64,
}

impl RankSim {
    pub fn new(hist: IdleHistogram, num_states: usize, trace_transitions: bool) -> Self {
        Self {
            state: 0,
            busy_until: 0,
            migrating_until: 0,
            idle_start: 0,
            acct: 0,
            config: DemotionConfig::disabled(num_states - 1),
            hist,
            residency: vec![0; num_states],
            others: OthersTime::default(),
            resync_energy: 0.0,
            resyncs: 0,
            accesses: 0,
            transitions: trace_transitions.then(Vec::new),
        }
    }

    pub fn is_idle_at(&self, t: u64) -> bool {
        self.busy_until <= t
    }

    fn set_state(&mut self, to: usize) {
        if let Some(log) = self.transitions.as_mut() {
            log.push((self.state, to));
        }
        self.state = to;
    }

    /// Walks the demotion chain of an idle rank up to time `to`. A deeper
    /// state whose timeout already elapsed (after a mid-idle configuration
    /// change) is entered immediately; the rank never moves back up.
    pub fn advance(&mut self, to: u64) {
        debug_assert!(self.busy_until <= to.max(self.acct));
        if to <= self.acct {
            return;
        }
        loop {
            let next = self.config.timeouts[self.state.min(self.config.timeouts.len())..]
                .iter()
                .enumerate()
                .find_map(|(i, d)| d.map(|d| (self.state + i + 1, d)));
            let Some((deeper, delta)) = next else { break };
            let at = self.idle_start.saturating_add(delta).max(self.acct);
            if at >= to {
                break;
            }
            self.residency[self.state] += at - self.acct;
            self.acct = at;
            self.set_state(deeper);
        }
        self.residency[self.state] += to - self.acct;
        self.acct = to;
    }

    /// Records the idle time since `max(idle_start, slot_start)` ending at `at`.
    pub fn record_idle(&mut self, slot_start: u64, at: u64) {
        let from = self.idle_start.max(slot_start);
        if at > from {
            self.hist
                .record_idle(at - from)
                .expect("idle periods are clipped to the slot");
        }
    }

    /// Brings an idle rank back to ACT at `at`.
    pub fn wake(&mut self, at: u64, states: &StateTable) -> Wake {
        self.advance(at);
        if self.state == 0 {
            return Wake { resync: 0 };
        }
        let r = states.resync_cycles[self.state];
        self.resync_energy += states.resync_energy[self.state];
        self.resyncs += 1;
        self.others.resync += r;
        self.set_state(0);
        self.acct = at + r;
        Wake { resync: r }
    }

    /// Occupies the rank from `acct` for `remap + service` cycles.
    pub fn serve(&mut self, remap: u64, service: u64) {
        self.others.remap += remap;
        self.others.service += service;
        self.accesses += 1;
        self.acct += remap + service;
        self.busy_until = self.acct;
        self.idle_start = self.acct;
    }

    /// Queues a request behind the current busy interval.
    pub fn serve_queued(&mut self, service: u64) {
        debug_assert_eq!(self.acct, self.busy_until);
        self.serve(0, service);
    }

    /// Marks the rank busy migrating from `from` until `until`.
    pub fn occupy_migration(&mut self, from: u64, until: u64) {
        debug_assert_eq!(self.acct, from);
        self.others.migration += until - from;
        self.acct = until;
        self.busy_until = until;
        self.migrating_until = until;
        self.idle_start = until;
    }

    /// Background energy: idle residency at each state's power plus
    /// service and remap time at ACT power.
    pub fn background_energy(&self, states: &StateTable) -> f64 {
        let idle: f64 = self.residency.iter().zip(&states.power).map(|(&t, &p)| t as f64 * p).sum();
        idle + (self.others.service + self.others.remap) as f64 * states.power[0]
    }
}
