use std::collections::VecDeque;

use super::{
    metrics::{DelayBreakdown, RankMetrics, SimMetrics, SlotHistograms, SlotRecord},
    rank::{OthersTime, RankSim, StateTable},
    EngineError, Policy, SimParams,
};
use crate::{
    arch::DramArchSpec,
    demotion::{exhaustive_config, greedy_config, ChainModel, DemotionConfig, DemotionError, SolveOptions},
    idlehist::{IdleHistogram, SparseHistogram},
    mq::MqStructure,
    placement::{plan_migration, remap_lookup, Migration, Placement, RemapTable},
    predictor::{predict_after_migration, predict_carry_forward, RankAccessProfile},
    trace::MemoryAccess,
};

#[derive(Clone)]
pub(super) struct Simulator<'a> {
    trace: &'a [MemoryAccess],
    spec: &'a DramArchSpec,
    params: &'a SimParams,
    model: ChainModel,
    states: StateTable,
    allowed: Option<Vec<bool>>,
    ranks: Vec<RankSim>,
    mq: MqStructure,
    placement: Placement,
    remap: RemapTable,
    offset: u64,
    cursor: usize,
    slot: u64,
    slot_start: u64,
    delay: DelayBreakdown,
    migration_energy: f64,
    mq_energy: f64,
    migrated_pages: u64,
    predicted: Vec<Option<SparseHistogram>>,
    last_actual: Vec<SparseHistogram>,
    slots: Vec<SlotRecord>,
    slot_resync_delay: u64,
    slot_migrated: usize,
    /// Planned segments not yet executed, highest priority first.
    pending: VecDeque<Vec<Migration>>,
    pending_since: u64,
    /// Placement once the pending segments complete.
    planned: Option<Placement>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        trace: &'a [MemoryAccess],
        spec: &'a DramArchSpec,
        params: &'a SimParams,
        trace_transitions: bool,
    ) -> Result<Self, EngineError> {
        let n = spec.states.len();
        let states = StateTable {
            power: spec.states.iter().map(|s| s.normalized_power).collect(),
            resync_cycles: (0..n).map(|i| spec.resync_cycles(i)).collect::<Result<_, _>>()?,
            resync_energy: (0..n).map(|i| spec.resync_energy(i)).collect::<Result<_, _>>()?,
        };
        let allowed = match params.policy {
            Policy::Rzsd => {
                let keep = params.rzsd_state_index(spec)?;
                Some((1..n).map(|i| i == keep).collect())
            }
            _ => None,
        };
        let hist = IdleHistogram::new(params.slot_cycles)?;
        let ranks = (0..params.ranks).map(|_| RankSim::new(hist.clone(), n, trace_transitions)).collect();
        let lifetime = params.mq_lifetime.unwrap_or(params.slot_cycles);
        Ok(Self {
            trace,
            spec,
            params,
            model: ChainModel::from_spec(spec),
            states,
            allowed,
            ranks,
            mq: MqStructure::new(params.mq_queues, lifetime),
            placement: Placement::new(params.ranks, params.capacity_pages)?,
            remap: RemapTable::new(params.ranks),
            offset: 0,
            cursor: 0,
            slot: 0,
            slot_start: 0,
            delay: DelayBreakdown::default(),
            migration_energy: 0.0,
            mq_energy: 0.0,
            migrated_pages: 0,
            predicted: vec![None; params.ranks],
            last_actual: Vec::new(),
            slots: Vec::new(),
            slot_resync_delay: 0,
            slot_migrated: 0,
            pending: VecDeque::new(),
            pending_since: 0,
            planned: None,
        })
    }

    pub fn run(mut self) -> Result<(SimMetrics, super::TransitionLog), EngineError> {
        let last = self.trace.last().map_or(0, |a| a.cycle + 1);
        let trace_end = self.params.trace_cycles.unwrap_or(last).max(last);
        self.begin_slot()?;
        loop {
            let boundary = self.slot_start + self.params.slot_cycles;
            self.run_until(boundary)?;
            if self.cursor == self.trace.len() && self.pending.is_empty() {
                let end = self.end_time(trace_end);
                if end <= boundary {
                    return self.finish(end, boundary);
                }
            }
            self.close_slot(boundary)?;
            self.slot += 1;
            self.slot_start = boundary;
            self.begin_slot()?;
        }
    }

    fn end_time(&self, trace_end: u64) -> u64 {
        let busy = self.ranks.iter().map(|r| r.busy_until).max().unwrap_or(0);
        (trace_end + self.offset).max(busy)
    }

    /// Processes accesses and migration segments that start before `boundary`.
    fn run_until(&mut self, boundary: u64) -> Result<(), EngineError> {
        while let Some(&a) = self.trace.get(self.cursor) {
            let v = a.cycle + self.offset;
            if v >= boundary {
                break;
            }
            self.run_segments_before(Some(v))?;
            self.access(a.page, v)?;
            self.cursor += 1;
        }
        self.run_segments_before(Some(boundary))
    }

    /// Starts pending segments, earliest feasible first (priority order on
    /// ties), while they can start before `limit`. A segment starts once all
    /// of its ranks are free.
    fn run_segments_before(&mut self, limit: Option<u64>) -> Result<(), EngineError> {
        while !self.pending.is_empty() {
            let (pos, start) = self
                .pending
                .iter()
                .enumerate()
                .map(|(i, seg)| {
                    let free = seg
                        .iter()
                        .flat_map(|m| [m.src, m.dst])
                        .map(|r| self.ranks[r].busy_until)
                        .max()
                        .unwrap_or(0);
                    (i, free.max(self.pending_since))
                })
                .min_by_key(|&(i, t)| (t, i))
                .expect("pending is non-empty");
            if limit.is_some_and(|l| start >= l) {
                break;
            }
            let seg = self.pending.remove(pos).expect("index from enumerate");
            self.execute_segment(&seg, start)?;
            if self.pending.is_empty() {
                self.planned = None;
            }
        }
        Ok(())
    }

    fn execute_segment(&mut self, seg: &[Migration], at: u64) -> Result<(), EngineError> {
        let mut involved: Vec<usize> = seg.iter().flat_map(|m| [m.src, m.dst]).collect();
        involved.sort_unstable();
        involved.dedup();
        for &r in &involved {
            let rank = &mut self.ranks[r];
            rank.advance(at);
            rank.record_idle(self.slot_start, at);
            rank.wake(at, &self.states);
        }
        let begin = involved.iter().map(|&r| self.ranks[r].acct).max().unwrap_or(at);
        let end = begin + self.params.costs.migration.segment_cycles(seg);
        for &r in &involved {
            let from = self.ranks[r].acct;
            self.ranks[r].occupy_migration(from, end);
        }
        for m in seg {
            self.placement.move_page(m)?;
            self.remap.set(m.page, m.dst);
        }
        self.migration_energy += seg.len() as f64 * self.params.costs.migration.energy_per_page;
        Ok(())
    }

    fn access(&mut self, page: u64, mut v: u64) -> Result<(), EngineError> {
        if self.placement.rank_of(page).is_none() {
            // while segments are pending, capacity is judged on the planned placement
            let r = match self.planned.as_mut() {
                Some(planned) => {
                    let r = planned.allocate(page)?;
                    self.placement.insert(page, r)?;
                    r
                }
                None => self.placement.allocate(page)?,
            };
            self.remap.set(page, r);
        }
        let r = remap_lookup(&self.remap, page);
        self.mq.on_access(page, v);
        let migrates = self.params.policy.migrates();
        if migrates {
            self.mq_energy += self.params.costs.mq_access_energy;
        }
        let g = self.params.access_latency;
        let rank = &mut self.ranks[r];
        if rank.migrating_until > v {
            let wait = rank.migrating_until - v;
            self.offset += wait;
            self.delay.migration += wait;
            v = rank.migrating_until;
        }
        if rank.is_idle_at(v) {
            rank.advance(v);
            rank.record_idle(self.slot_start, v);
            let wake = rank.wake(v, &self.states);
            let remap = if migrates { self.params.costs.remap_lookup_cycles } else { 0 };
            self.offset += wake.resync + remap;
            self.delay.resync += wake.resync;
            self.delay.remap += remap;
            self.slot_resync_delay += wake.resync;
            rank.serve(remap, g);
        } else {
            rank.serve_queued(g);
        }
        Ok(())
    }

    /// Ends the slot's idle periods at `boundary` and returns (and clears)
    /// every rank's histogram.
    fn take_histograms(&mut self, boundary: u64) -> Vec<SparseHistogram> {
        let slot_start = self.slot_start;
        self.ranks
            .iter_mut()
            .map(|rank| {
                if rank.is_idle_at(boundary) {
                    rank.advance(boundary);
                    rank.record_idle(slot_start, boundary);
                }
                let h = rank.hist.to_sparse();
                rank.hist.reset();
                h
            })
            .collect()
    }

    fn close_slot(&mut self, boundary: u64) -> Result<(), EngineError> {
        let actual = self.take_histograms(boundary);
        self.push_slot_record(&actual, true);
        self.mq.roll_slot();
        self.mq.expire(boundary);
        self.last_actual = actual;
        Ok(())
    }

    fn push_slot_record(&mut self, actual: &[SparseHistogram], complete: bool) {
        let prediction_error = if complete && self.predicted.iter().all(Option::is_some) {
            let (l1, total) = self
                .predicted
                .iter()
                .zip(actual)
                .map(|(p, a)| p.as_ref().expect("checked above").binned_l1(a))
                .fold((0.0, 0.0), |acc, (l, t)| (acc.0 + l, acc.1 + t));
            (total > 0.0).then(|| l1 / total)
        } else {
            None
        };
        let histograms = self.params.record_histograms.then(|| SlotHistograms {
            predicted: self
                .predicted
                .iter()
                .map(|p| p.clone().unwrap_or_else(|| SparseHistogram::empty(self.params.slot_cycles)))
                .collect(),
            actual: actual.to_vec(),
        });
        self.slots.push(SlotRecord {
            slot: self.slot,
            prediction_error,
            resync_delay: self.slot_resync_delay,
            migrated_pages: self.slot_migrated,
            configs: self.ranks.iter().map(|r| r.config.clone()).collect(),
            histograms,
        });
        self.slot_resync_delay = 0;
        self.slot_migrated = 0;
    }

    fn rank_idle_probs(&self, placement: &Placement) -> Vec<f64> {
        let (g, t) = (self.params.access_latency, self.params.slot_cycles);
        (0..self.params.ranks)
            .map(|r| {
                let freqs = placement
                    .pages_of(r)
                    .iter()
                    .map(|p| self.mq.get(*p).map_or(0, |d| d.last_slot_accesses));
                RankAccessProfile::from_frequencies(freqs, g, t).map(|p| p.idle_prob()).unwrap_or(1.0)
            })
            .collect()
    }

    fn begin_slot(&mut self) -> Result<(), EngineError> {
        let policy = self.params.policy;
        let epoch_start = self.slot > 0 && self.slot.is_multiple_of(self.params.slots_per_epoch);
        let mut idle_probs = None;
        if policy.migrates() && epoch_start {
            if let Some(after) = self.plan_epoch_migration()? {
                idle_probs = Some((self.rank_idle_probs(&self.placement), self.rank_idle_probs(&after)));
            }
        }
        let m = self.model.len();
        let configs: Vec<DemotionConfig> = match policy {
            Policy::Base => vec![DemotionConfig::disabled(m); self.params.ranks],
            Policy::Oracle => self.lookahead_configs()?,
            Policy::Ramzzz | Policy::Rzsp | Policy::Rzsd if self.slot == 0 => {
                vec![DemotionConfig::disabled(m); self.params.ranks]
            }
            Policy::Ramzzz | Policy::Rzsp | Policy::Rzsd => {
                let g = self.params.access_latency;
                let mut configs = Vec::with_capacity(self.params.ranks);
                for r in 0..self.params.ranks {
                    let prev = &self.last_actual[r];
                    let pred = match &idle_probs {
                        Some((q_old, q_new)) => predict_after_migration(prev, q_old[r], q_new[r], g),
                        None => predict_carry_forward(prev),
                    };
                    configs.push(self.solve(&pred, false)?);
                    self.predicted[r] = Some(pred);
                }
                configs
            }
        };
        for (rank, cfg) in self.ranks.iter_mut().zip(configs) {
            rank.config = cfg;
        }
        Ok(())
    }

    fn solve(&self, hist: &SparseHistogram, try_exhaustive: bool) -> Result<DemotionConfig, EngineError> {
        let mut opts = SolveOptions::new(self.params.delay_budget(), self.params.objective, self.params.slot_cycles as f64);
        opts.exponential = self.params.exponential_search;
        opts.allowed = self.allowed.clone();
        if try_exhaustive {
            match exhaustive_config(hist, &self.model, &opts) {
                Ok(s) => return Ok(s.config),
                Err(DemotionError::InstanceTooLarge { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(greedy_config(hist, &self.model, &opts)?.config)
    }

    /// Profiles the coming slot with every rank kept active, then solves each
    /// rank's configuration on the histogram it actually produced.
    fn lookahead_configs(&mut self) -> Result<Vec<DemotionConfig>, EngineError> {
        let mut probe = self.clone();
        for rank in &mut probe.ranks {
            rank.config = DemotionConfig::disabled(self.model.len());
            rank.transitions = None;
        }
        let boundary = self.slot_start + self.params.slot_cycles;
        probe.run_until(boundary)?;
        let actual = probe.take_histograms(boundary);
        actual.iter().map(|h| self.solve(h, true)).collect()
    }

    /// Plans the epoch's migrations and queues their segments. Returns the
    /// placement once they complete, if anything moves.
    fn plan_epoch_migration(&mut self) -> Result<Option<Placement>, EngineError> {
        self.run_segments_before(None)?;
        if !self.placement.is_consistent() {
            return Err(EngineError::Invariant("placement exceeds rank capacity".into()));
        }
        let schedule = plan_migration(&self.placement, &self.mq.hotness_order())?;
        if schedule.is_empty() {
            return Ok(None);
        }
        let mut after = self.placement.clone();
        after.apply(&schedule)?;
        self.migrated_pages += schedule.num_migrations() as u64;
        self.slot_migrated = schedule.num_migrations();
        self.pending = schedule.segments.into();
        self.pending_since = self.slot_start;
        self.planned = Some(after.clone());
        Ok(Some(after))
    }

    fn finish(mut self, end: u64, boundary: u64) -> Result<(SimMetrics, super::TransitionLog), EngineError> {
        if end > self.slot_start {
            let actual = self.take_histograms(end);
            self.push_slot_record(&actual, end == boundary);
        }
        for rank in &mut self.ranks {
            rank.advance(end);
            // the final low-power period still ends with a wake-up
            if rank.state != 0 {
                rank.resync_energy += self.states.resync_energy[rank.state];
            }
        }

        let n = self.spec.states.len();
        let mut residency = vec![0u64; n];
        let mut others = OthersTime::default();
        let mut rank_metrics = Vec::with_capacity(self.ranks.len());
        for (r, rank) in self.ranks.iter().enumerate() {
            let accounted = rank.residency.iter().sum::<u64>() + rank.others.total();
            if accounted != end {
                return Err(EngineError::Invariant(format!("rank {r} accounts for {accounted} of {end} cycles")));
            }
            for (acc, t) in residency.iter_mut().zip(&rank.residency) {
                *acc += t;
            }
            others.add(&rank.others);
            rank_metrics.push(RankMetrics {
                background_energy: rank.background_energy(&self.states),
                resync_energy: rank.resync_energy,
                residency: rank.residency.clone(),
                others: rank.others,
                accesses: rank.accesses,
                resyncs: rank.resyncs,
            });
        }
        let background_energy: f64 = rank_metrics.iter().map(|r| r.background_energy).sum();
        let resync_energy: f64 = rank_metrics.iter().map(|r| r.resync_energy).sum();
        let total_energy = background_energy + resync_energy + self.migration_energy + self.mq_energy;
        let after_first_epoch: Vec<f64> = self
            .slots
            .iter()
            .filter(|s| s.slot >= self.params.slots_per_epoch)
            .filter_map(|s| s.prediction_error)
            .collect();
        let mean_prediction_error =
            (!after_first_epoch.is_empty()).then(|| after_first_epoch.iter().sum::<f64>() / after_first_epoch.len() as f64);
        let transitions = self.ranks.iter_mut().map(|r| r.transitions.take().unwrap_or_default()).collect();

        let metrics = SimMetrics {
            policy: self.params.policy,
            arch: self.spec.name.clone(),
            state_names: self.spec.states.iter().map(|s| s.name.clone()).collect(),
            params: self.params.clone(),
            accesses: self.trace.len() as u64,
            total_energy,
            background_energy,
            resync_energy,
            migration_energy: self.migration_energy,
            mq_energy: self.mq_energy,
            delay: self.delay,
            exec_time: end,
            residency,
            others,
            ranks: rank_metrics,
            migrated_pages: self.migrated_pages,
            slots: self.slots,
            mean_prediction_error,
            ed2: total_energy * (end as f64) * (end as f64),
            mq_levels: self.mq.mq_level_report(),
        };
        Ok((metrics, transitions))
    }
}
