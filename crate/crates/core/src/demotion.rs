//! Demotion-chain energy/delay model and timeout solvers.
//!
//! An idle period of `t` cycles under timeouts `(Δ1..ΔM)` stays in ACT for
//! `Δ1` cycles, then walks down the chain, spending `Δ(j+1) - Δj` cycles in
//! each intermediate state, and ends in the deepest state `I(t)` whose
//! timeout is strictly below `t`; the wake-up back to ACT costs that state's
//! resynchronization energy and delay. Disabled states (`None`) are skipped.

use serde::{Deserialize, Serialize};

use crate::{arch::DramArchSpec, idlehist::SparseHistogram};

/// Upper bound on the number of timeout vectors [`exhaustive_config`] will
/// enumerate: 32^3, i.e. 30 distinct lengths plus `0` and `∞` over 3 states.
pub const EXHAUSTIVE_LIMIT: f64 = 32_768.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DemotionError {
    #[error("idle period of {t} cycles does not reach the first timeout")]
    NotDemoting { t: u64 },
    #[error("exhaustive search over {vectors:.0} timeout vectors exceeds the limit")]
    InstanceTooLarge { vectors: f64 },
    #[error("invalid chain model: {0}")]
    InvalidModel(String),
    #[error("delay budget must be non-negative")]
    NegativeBudget,
    #[error("timeout vector has {got} entries, chain has {expected} states")]
    LengthMismatch { got: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub name: String,
    pub power: f64,
    /// Resynchronization energy, ACT-power x cycles.
    pub energy: f64,
    /// Resynchronization delay, cycles.
    pub resync: u64,
}

/// Numeric view of a demotion chain: ACT power plus `S1..SM`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub p_act: f64,
    pub states: Vec<ChainState>,
}

impl ChainModel {
    pub fn new(p_act: f64, states: Vec<ChainState>) -> Result<Self, DemotionError> {
        if states.is_empty() {
            return Err(DemotionError::InvalidModel("no low-power states".into()));
        }
        let mut prev_power = p_act;
        let mut prev_resync = 0;
        for s in &states {
            if !(s.power >= 0.0 && s.power < prev_power) {
                return Err(DemotionError::InvalidModel(format!("power of `{}` must be below its predecessor", s.name)));
            }
            if s.resync < prev_resync {
                return Err(DemotionError::InvalidModel(format!("resync of `{}` decreases along the chain", s.name)));
            }
            if !(s.energy >= 0.0 && s.energy.is_finite()) {
                return Err(DemotionError::InvalidModel(format!("energy of `{}` is invalid", s.name)));
            }
            prev_power = s.power;
            prev_resync = s.resync;
        }
        Ok(Self { p_act, states })
    }

    pub fn from_spec(spec: &DramArchSpec) -> Self {
        let states = (1..spec.states.len())
            .map(|i| ChainState {
                name: spec.states[i].name.clone(),
                power: spec.states[i].normalized_power,
                energy: spec.resync_energy(i).expect("index in range"),
                resync: spec.resync_cycles(i).expect("index in range"),
            })
            .collect();
        Self::new(spec.act_power(), states).expect("validated spec yields a valid chain")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Timeouts `Δ1..ΔM` in cycles; `None` disables the state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemotionConfig {
    pub timeouts: Vec<Option<u64>>,
}

impl DemotionConfig {
    pub fn disabled(m: usize) -> Self {
        Self { timeouts: vec![None; m] }
    }

    pub fn new(timeouts: Vec<Option<u64>>) -> Self {
        Self { timeouts }
    }

    /// `(state index, timeout)` of enabled states in chain order.
    pub fn active_states(&self) -> Vec<(usize, u64)> {
        self.timeouts
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (i, d)))
            .collect()
    }

    pub fn is_all_disabled(&self) -> bool {
        self.timeouts.iter().all(Option::is_none)
    }

    /// Enabled timeouts are non-decreasing along the chain.
    pub fn is_monotone(&self) -> bool {
        self.active_states().windows(2).all(|w| w[0].1 <= w[1].1)
    }

    /// Deepest state reached by an idle period of `t` cycles, if any.
    pub fn deepest_reached(&self, t: u64) -> Option<usize> {
        self.active_states()
            .into_iter()
            .filter(|&(_, d)| d < t)
            .map(|(i, _)| i)
            .next_back()
    }

    fn check(&self, model: &ChainModel) -> Result<(), DemotionError> {
        if self.timeouts.len() != model.len() {
            return Err(DemotionError::LengthMismatch { got: self.timeouts.len(), expected: model.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Energy,
    #[default]
    Ed2,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(Self::Energy),
            "ed2" => Ok(Self::Ed2),
            other => Err(format!("unknown objective `{other}` (expected energy or ed2)")),
        }
    }
}

/// `E` for the energy objective, `E * (base_delay + D)^2` for ED².
pub fn objective_value(energy: f64, delay: f64, base_delay: f64, objective: Objective) -> f64 {
    match objective {
        Objective::Energy => energy,
        Objective::Ed2 => energy * (base_delay + delay).powi(2),
    }
}

/// Energy of one idle period of `t > Δ1` cycles.
pub fn idle_energy(cfg: &DemotionConfig, t: u64, model: &ChainModel) -> Result<f64, DemotionError> {
    cfg.check(model)?;
    let active = cfg.active_states();
    let Some(&(_, first)) = active.first() else {
        return Err(DemotionError::NotDemoting { t });
    };
    if t <= first {
        return Err(DemotionError::NotDemoting { t });
    }
    let reached: Vec<(usize, u64)> = active.into_iter().filter(|&(_, d)| d < t).collect();
    let mut energy = model.p_act * first as f64;
    for pair in reached.windows(2) {
        let (state, d) = pair[0];
        energy += model.states[state].power * (pair[1].1 - d) as f64;
    }
    let &(last, d_last) = reached.last().expect("first timeout is below t");
    let s = &model.states[last];
    Ok(energy + s.power * (t - d_last) as f64 + s.energy)
}

/// Total energy over every idle period of `hist`, bucket by bucket.
pub fn total_energy(cfg: &DemotionConfig, hist: &SparseHistogram, model: &ChainModel) -> Result<f64, DemotionError> {
    cfg.check(model)?;
    let first = cfg.active_states().first().map(|&(_, d)| d);
    hist.buckets.iter().try_fold(0.0, |acc, &(t, w)| {
        let e = match first {
            Some(d) if t > d => idle_energy(cfg, t, model)?,
            _ => model.p_act * t as f64,
        };
        Ok(acc + e * w)
    })
}

/// Total resynchronization delay in cycles.
pub fn total_delay(cfg: &DemotionConfig, hist: &SparseHistogram, model: &ChainModel) -> Result<f64, DemotionError> {
    cfg.check(model)?;
    Ok(hist
        .buckets
        .iter()
        .filter_map(|&(t, w)| cfg.deepest_reached(t).map(|s| model.states[s].resync as f64 * w))
        .sum())
}

/// Prefix sums over a histogram so that `(E, D)` of a configuration costs
/// `O(M log K)` instead of `O(K)`.
#[derive(Clone, Debug)]
pub struct PreparedHistogram {
    lengths: Vec<u64>,
    cum_weight: Vec<f64>,
    cum_time: Vec<f64>,
}

impl PreparedHistogram {
    pub fn new(hist: &SparseHistogram) -> Self {
        let mut cum_weight = Vec::with_capacity(hist.buckets.len() + 1);
        let mut cum_time = Vec::with_capacity(hist.buckets.len() + 1);
        let (mut w_acc, mut t_acc) = (0.0, 0.0);
        cum_weight.push(0.0);
        cum_time.push(0.0);
        for &(t, w) in &hist.buckets {
            w_acc += w;
            t_acc += w * t as f64;
            cum_weight.push(w_acc);
            cum_time.push(t_acc);
        }
        Self {
            lengths: hist.buckets.iter().map(|&(t, _)| t).collect(),
            cum_weight,
            cum_time,
        }
    }

    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    fn index_above(&self, x: u64) -> usize {
        self.lengths.partition_point(|&l| l <= x)
    }

    /// Weight and weighted time of periods with `lo < t <= hi`.
    fn range(&self, lo: Option<u64>, hi: Option<u64>) -> (f64, f64) {
        let a = lo.map_or(0, |x| self.index_above(x));
        let b = hi.map_or(self.lengths.len(), |x| self.index_above(x));
        if b <= a {
            return (0.0, 0.0);
        }
        (self.cum_weight[b] - self.cum_weight[a], self.cum_time[b] - self.cum_time[a])
    }

    /// `(E, D)` of `active` (chain-ordered, monotone) timeouts.
    pub fn evaluate_active(&self, active: &[(usize, u64)], model: &ChainModel) -> (f64, f64) {
        let Some(&(_, first)) = active.first() else {
            return (model.p_act * self.cum_time.last().copied().unwrap_or(0.0), 0.0);
        };
        let (_, below) = self.range(None, Some(first));
        let mut energy = model.p_act * below;
        let mut delay = 0.0;
        let mut prefix = model.p_act * first as f64;
        for (j, &(state, d)) in active.iter().enumerate() {
            let next = active.get(j + 1).map(|&(_, dn)| dn);
            let s = &model.states[state];
            let (w, tw) = self.range(Some(d), next);
            energy += w * (prefix - s.power * d as f64 + s.energy) + s.power * tw;
            delay += w * s.resync as f64;
            if let Some(dn) = next {
                prefix += s.power * (dn - d) as f64;
            }
        }
        (energy, delay)
    }

    pub fn evaluate(&self, cfg: &DemotionConfig, model: &ChainModel) -> (f64, f64) {
        self.evaluate_active(&cfg.active_states(), model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Resynchronization delay budget in cycles.
    pub budget: f64,
    pub objective: Objective,
    /// Base execution time for the ED² objective (the slot length).
    pub base_delay: f64,
    /// Search timeouts on the `2^i` ladder instead of observed lengths.
    pub exponential: bool,
    /// States the solver may enable; `None` allows all.
    pub allowed: Option<Vec<bool>>,
}

impl SolveOptions {
    pub fn new(budget: f64, objective: Objective, base_delay: f64) -> Self {
        Self { budget, objective, base_delay, exponential: false, allowed: None }
    }

    fn allows(&self, state: usize) -> bool {
        self.allowed.as_ref().is_none_or(|a| a.get(state).copied().unwrap_or(false))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub config: DemotionConfig,
    pub energy: f64,
    pub delay: f64,
    pub objective: f64,
}

/// Finite candidate timeouts, ascending: 0 plus either every observed
/// length or the powers of two up to the slot length.
pub fn candidate_timeouts(hist: &SparseHistogram, exponential: bool) -> Vec<u64> {
    let mut c = vec![0];
    if exponential {
        let mut x = 1u64;
        while x <= hist.slot_cycles.max(1) {
            c.push(x);
            x = match x.checked_mul(2) {
                Some(v) => v,
                None => break,
            };
        }
    } else {
        c.extend(hist.buckets.iter().map(|&(t, _)| t));
    }
    c.sort_unstable();
    c.dedup();
    c
}

fn score(prep: &PreparedHistogram, model: &ChainModel, cfg: &DemotionConfig, opts: &SolveOptions) -> (f64, f64, f64) {
    let (e, d) = prep.evaluate(cfg, model);
    (e, d, objective_value(e, d, opts.base_delay, opts.objective))
}

/// Greedy timeout search: each round fixes the timeouts chosen so far and
/// adds the state (with its best timeout) that most improves the objective,
/// until every allowed state has been placed.
///
/// Timeouts are tried from the largest down and the scan stops at the first
/// one that breaks the delay budget, since lowering a timeout can only add
/// delay. A disabled timeout is always a candidate, so the result is never
/// infeasible.
pub fn greedy_config(hist: &SparseHistogram, model: &ChainModel, opts: &SolveOptions) -> Result<Solution, DemotionError> {
    if !(opts.budget >= 0.0) {
        return Err(DemotionError::NegativeBudget);
    }
    let prep = PreparedHistogram::new(hist);
    let candidates = candidate_timeouts(hist, opts.exponential);
    let m = model.len();
    let mut cfg = DemotionConfig::disabled(m);
    let mut remaining: Vec<usize> = (0..m).filter(|&s| opts.allows(s)).collect();
    let (mut e0, mut d0, mut best_obj) = score(&prep, model, &cfg, opts);

    while !remaining.is_empty() {
        // (position in `remaining`, timeout, E, D, objective)
        let mut round_best: Option<(usize, Option<u64>, f64, f64, f64)> = None;
        for (pos, &s) in remaining.iter().enumerate() {
            let lo = cfg.timeouts[..s].iter().flatten().max().copied().unwrap_or(0);
            let hi = cfg.timeouts[s + 1..].iter().flatten().min().copied();
            let mut trial = cfg.clone();
            let mut state_best = (None, e0, d0, best_obj);
            for &d in candidates.iter().rev() {
                if d < lo || hi.is_some_and(|h| d > h) {
                    if d < lo {
                        break;
                    }
                    continue;
                }
                trial.timeouts[s] = Some(d);
                let (e, dl, obj) = score(&prep, model, &trial, opts);
                if dl > opts.budget {
                    break;
                }
                if obj < state_best.3 {
                    state_best = (Some(d), e, dl, obj);
                }
            }
            if round_best.as_ref().is_none_or(|b| state_best.3 < b.4) {
                round_best = Some((pos, state_best.0, state_best.1, state_best.2, state_best.3));
            }
        }
        let (pos, timeout, e, d, obj) = round_best.expect("remaining is non-empty");
        let s = remaining.remove(pos);
        cfg.timeouts[s] = timeout;
        (e0, d0, best_obj) = (e, d, obj);
    }
    Ok(Solution { config: cfg, energy: e0, delay: d0, objective: best_obj })
}

/// True optimum over monotone timeout vectors drawn from
/// `{0} ∪ observed lengths ∪ {∞}`.
pub fn exhaustive_config(hist: &SparseHistogram, model: &ChainModel, opts: &SolveOptions) -> Result<Solution, DemotionError> {
    if !(opts.budget >= 0.0) {
        return Err(DemotionError::NegativeBudget);
    }
    let candidates = candidate_timeouts(hist, false);
    let free: Vec<usize> = (0..model.len()).filter(|&s| opts.allows(s)).collect();
    let vectors = ((candidates.len() + 1) as f64).powi(free.len() as i32);
    if vectors > EXHAUSTIVE_LIMIT {
        return Err(DemotionError::InstanceTooLarge { vectors });
    }
    let prep = PreparedHistogram::new(hist);
    let mut cfg = DemotionConfig::disabled(model.len());
    let (e, d, obj) = score(&prep, model, &cfg, opts);
    let mut best = Solution { config: cfg.clone(), energy: e, delay: d, objective: obj };
    enumerate(&free, 0, 0, &candidates, &mut cfg, &mut |cfg| {
        let (e, d, obj) = score(&prep, model, cfg, opts);
        if d <= opts.budget && obj < best.objective {
            best = Solution { config: cfg.clone(), energy: e, delay: d, objective: obj };
        }
    });
    Ok(best)
}

fn enumerate(
    free: &[usize],
    at: usize,
    floor: u64,
    candidates: &[u64],
    cfg: &mut DemotionConfig,
    visit: &mut impl FnMut(&DemotionConfig),
) {
    if at == free.len() {
        visit(cfg);
        return;
    }
    let s = free[at];
    cfg.timeouts[s] = None;
    enumerate(free, at + 1, floor, candidates, cfg, visit);
    for &d in candidates.iter().filter(|&&d| d >= floor) {
        cfg.timeouts[s] = Some(d);
        enumerate(free, at + 1, d, candidates, cfg, visit);
    }
    cfg.timeouts[s] = None;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_state() -> ChainModel {
        ChainModel::new(1.0, vec![ChainState { name: "S1".into(), power: 0.5, energy: 2.0, resync: 4 }]).unwrap()
    }

    fn two_states() -> ChainModel {
        ChainModel::new(
            1.0,
            vec![
                ChainState { name: "S1".into(), power: 0.6, energy: 1.0, resync: 1 },
                ChainState { name: "S2".into(), power: 0.2, energy: 5.0, resync: 3 },
            ],
        )
        .unwrap()
    }

    fn hist_3_3_9() -> SparseHistogram {
        SparseHistogram::from_pairs(100, [(3, 2.0), (9, 1.0)])
    }

    fn cfg(t: &[Option<u64>]) -> DemotionConfig {
        DemotionConfig::new(t.to_vec())
    }

    #[test]
    fn single_period_energy() {
        assert_eq!(idle_energy(&cfg(&[Some(5)]), 9, &one_state()).unwrap(), 9.0);
        let two = two_states();
        assert!((idle_energy(&cfg(&[Some(2), Some(6)]), 10, &two).unwrap() - 10.2).abs() < 1e-12);
        assert!((idle_energy(&cfg(&[Some(2), Some(6)]), 6, &two).unwrap() - 5.4).abs() < 1e-12);
        assert_eq!(idle_energy(&cfg(&[Some(5)]), 5, &one_state()), Err(DemotionError::NotDemoting { t: 5 }));
    }

    #[test]
    fn disabled_states_are_skipped() {
        let two = two_states();
        // S1 disabled: ACT for 2 cycles then S2 directly
        let e = idle_energy(&cfg(&[None, Some(2)]), 10, &two).unwrap();
        assert!((e - (2.0 + 0.2 * 8.0 + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn histogram_energy() {
        let m = one_state();
        let h = hist_3_3_9();
        assert_eq!(total_energy(&cfg(&[Some(5)]), &h, &m).unwrap(), 15.0);
        assert_eq!(total_energy(&cfg(&[Some(0)]), &h, &m).unwrap(), 13.5);
        assert_eq!(total_energy(&cfg(&[None]), &h, &m).unwrap(), 15.0);
        let h2 = SparseHistogram::from_pairs(100, [(3, 2.0), (20, 1.0)]);
        assert_eq!(total_energy(&DemotionConfig::disabled(1), &h2, &m).unwrap(), 26.0);
    }

    #[test]
    fn histogram_delay() {
        let m = one_state();
        let h = hist_3_3_9();
        assert_eq!(total_delay(&cfg(&[Some(5)]), &h, &m).unwrap(), 4.0);
        assert_eq!(total_delay(&cfg(&[Some(0)]), &h, &m).unwrap(), 12.0);
        assert_eq!(total_delay(&cfg(&[None]), &h, &m).unwrap(), 0.0);
    }

    #[test]
    fn objective_forms() {
        assert_eq!(objective_value(3.0, 7.0, 10.0, Objective::Energy), 3.0);
        assert_eq!(objective_value(3.0, 0.0, 10.0, Objective::Ed2), 300.0);
        let a = objective_value(3.0, 2.0, 0.0, Objective::Ed2);
        let b = objective_value(3.0, 4.0, 0.0, Objective::Ed2);
        assert_eq!(b, 4.0 * a);
    }

    #[test]
    fn single_state_greedy_matches_exhaustive() {
        let m = one_state();
        let h = hist_3_3_9();
        let opts = SolveOptions::new(f64::INFINITY, Objective::Energy, 100.0);
        let g = greedy_config(&h, &m, &opts).unwrap();
        let x = exhaustive_config(&h, &m, &opts).unwrap();
        assert_eq!(g.config, cfg(&[Some(0)]));
        assert_eq!(g.energy, 13.5);
        assert_eq!(g, x);
    }

    #[test]
    fn empty_histogram_and_zero_budget() {
        let m = two_states();
        let opts = SolveOptions::new(100.0, Objective::Energy, 100.0);
        let x = exhaustive_config(&SparseHistogram::empty(100), &m, &opts).unwrap();
        assert!(x.config.is_all_disabled());
        assert_eq!(x.energy, 0.0);

        let zero = SolveOptions::new(0.0, Objective::Energy, 100.0);
        let h = hist_3_3_9();
        assert!(exhaustive_config(&h, &m, &zero).unwrap().config.is_all_disabled() ||
            exhaustive_config(&h, &m, &zero).unwrap().delay == 0.0);
        assert_eq!(greedy_config(&h, &m, &zero).unwrap().delay, 0.0);
    }

    #[test]
    fn long_period_goes_straight_to_deepest() {
        let m = two_states();
        let h = SparseHistogram::from_pairs(100_000, [(50_000, 1.0)]);
        let opts = SolveOptions::new(f64::INFINITY, Objective::Energy, 100_000.0);
        let x = exhaustive_config(&h, &m, &opts).unwrap();
        assert_eq!(x.config.deepest_reached(50_000), Some(1));
        // manual: S2 for the whole period plus its resync energy
        assert!((x.energy - (0.2 * 50_000.0 + 5.0)).abs() < 1e-9);
    }

    #[test]
    fn exhaustive_guard() {
        let m = ChainModel::from_spec(&DramArchSpec::ddr3());
        let h = SparseHistogram::from_pairs(1000, (1..=40).map(|t| (t * 10, 1.0)));
        let opts = SolveOptions::new(1e9, Objective::Energy, 1000.0);
        assert!(matches!(exhaustive_config(&h, &m, &opts), Err(DemotionError::InstanceTooLarge { .. })));
        assert!(greedy_config(&h, &m, &SolveOptions::new(-1.0, Objective::Energy, 1.0)).is_err());
    }

    #[test]
    fn allowed_mask_restricts_states() {
        let m = two_states();
        let h = SparseHistogram::from_pairs(1000, [(500, 1.0)]);
        let mut opts = SolveOptions::new(f64::INFINITY, Objective::Energy, 1000.0);
        opts.allowed = Some(vec![true, false]);
        let g = greedy_config(&h, &m, &opts).unwrap();
        assert_eq!(g.config.timeouts[1], None);
        assert_eq!(g.config.timeouts[0], Some(0));
    }

    #[test]
    fn exponential_ladder() {
        let h = SparseHistogram::from_pairs(100, [(7, 1.0)]);
        assert_eq!(candidate_timeouts(&h, true), vec![0, 1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(candidate_timeouts(&h, false), vec![0, 7]);
    }

    fn arb_model() -> impl Strategy<Value = ChainModel> {
        proptest::collection::vec((0.01f64..0.95, 0.0f64..50.0, 0u64..40), 1..=3).prop_map(|mut raw| {
            raw.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            raw.dedup_by(|a, b| a.0 == b.0);
            let mut resync: Vec<u64> = raw.iter().map(|r| r.2).collect();
            resync.sort_unstable();
            let states = raw
                .iter()
                .zip(resync)
                .enumerate()
                .map(|(i, (r, rs))| ChainState { name: format!("S{}", i + 1), power: r.0, energy: r.1, resync: rs })
                .collect();
            ChainModel::new(1.0, states).unwrap()
        })
    }

    proptest! {
        #[test]
        fn prepared_matches_direct(model in arb_model(), pairs in proptest::collection::vec((1u64..500, 1u32..5), 0..25), raw in proptest::collection::vec(proptest::option::of(0u64..500), 3)) {
            let h = SparseHistogram::from_pairs(10_000, pairs.into_iter().map(|(t, w)| (t, w as f64)));
            let mut timeouts: Vec<Option<u64>> = raw[..model.len()].to_vec();
            let mut fin: Vec<u64> = timeouts.iter().flatten().copied().collect();
            fin.sort_unstable();
            let mut it = fin.into_iter();
            for t in timeouts.iter_mut() { if t.is_some() { *t = it.next(); } }
            let c = DemotionConfig::new(timeouts);
            prop_assert!(c.is_monotone());
            let (e, d) = PreparedHistogram::new(&h).evaluate(&c, &model);
            let e2 = total_energy(&c, &h, &model).unwrap();
            let d2 = total_delay(&c, &h, &model).unwrap();
            prop_assert!((e - e2).abs() <= 1e-9 * e2.abs().max(1.0));
            prop_assert!((d - d2).abs() <= 1e-9 * d2.abs().max(1.0));
        }

        #[test]
        fn solvers_respect_budget_and_monotonicity(model in arb_model(), pairs in proptest::collection::vec((1u64..2000, 1u32..5), 0..15), budget in 0.0f64..200.0, ed2 in any::<bool>()) {
            let h = SparseHistogram::from_pairs(10_000, pairs.into_iter().map(|(t, w)| (t, w as f64)));
            let obj = if ed2 { Objective::Ed2 } else { Objective::Energy };
            let opts = SolveOptions::new(budget, obj, 10_000.0);
            let g = greedy_config(&h, &model, &opts).unwrap();
            let x = exhaustive_config(&h, &model, &opts).unwrap();
            prop_assert!(g.delay <= budget && x.delay <= budget);
            prop_assert!(g.config.is_monotone() && x.config.is_monotone());
            prop_assert!(x.objective <= g.objective * (1.0 + 1e-12));
        }
    }
}
