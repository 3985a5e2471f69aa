//! Reference models and workloads shared by the integration tests and the
//! acceptance suite. Nothing here calls the closed-form model it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ramzzz_core::{
    demotion::{ChainModel, ChainState, DemotionConfig},
    engine::{compute_ed2, run_simulation, SimMetrics, SimParams},
    placement::{Migration, MigrationGraph, MigrationSchedule},
    trace::{generate_synthetic_trace, MemoryAccess, SyntheticTraceParams},
    DramArchSpec, Policy, SparseHistogram,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Walks one idle period of `t` cycles cycle by cycle: at cycle `c` the rank
/// sits in the deepest enabled state whose timeout is `<= c`. Returns
/// `(energy, resync delay)`.
pub fn dense_period(cfg: &DemotionConfig, t: u64, model: &ChainModel) -> (f64, f64) {
    let mut energy = 0.0;
    let mut state: Option<usize> = None;
    for c in 0..t {
        for (s, d) in cfg.timeouts.iter().enumerate() {
            if d.is_some_and(|d| d <= c) && state.is_none_or(|cur| s > cur) {
                state = Some(s);
            }
        }
        energy += state.map_or(model.p_act, |s| model.states[s].power);
    }
    match state {
        Some(s) => (energy + model.states[s].energy, model.states[s].resync as f64),
        None => (energy, 0.0),
    }
}

/// Dense histogram: `counts[len]` periods of `len` cycles.
pub fn dense_totals(cfg: &DemotionConfig, counts: &[u64], model: &ChainModel) -> (f64, f64) {
    let (mut e, mut d) = (0.0, 0.0);
    for (len, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let (pe, pd) = dense_period(cfg, len as u64, model);
        e += pe * n as f64;
        d += pd * n as f64;
    }
    (e, d)
}

pub fn sparse_from_dense(slot: u64, counts: &[u64]) -> SparseHistogram {
    SparseHistogram::from_pairs(
        slot,
        counts.iter().enumerate().filter(|(_, &n)| n > 0).map(|(l, &n)| (l as u64, n as f64)),
    )
}

/// Random chain with powers on a 1/1000 grid and integer resync costs.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize) -> ChainModel {
    let mut powers: Vec<u32> = (0..m).map(|_| rng.random_range(50..990)).collect();
    powers.sort_unstable_by(|a, b| b.cmp(a));
    powers.dedup();
    while powers.len() < m {
        let last = *powers.last().unwrap();
        powers.push(last.saturating_sub(7).max(1));
        powers.dedup();
    }
    let mut resync = 0u64;
    let states = powers
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            resync += rng.random_range(0..200);
            ChainState {
                name: format!("S{}", i + 1),
                power: p as f64 / 1000.0,
                energy: rng.random_range(0..400) as f64,
                resync,
            }
        })
        .collect();
    ChainModel::new(1.0, states).expect("valid random chain")
}

/// One of the built-in architectures or a random chain, with up to `max_m`
/// states.
pub fn random_chain(rng: &mut ChaCha8Rng, max_m: usize) -> ChainModel {
    match rng.random_range(0..4) {
        0 => ChainModel::from_spec(&DramArchSpec::ddr3()),
        1 => ChainModel::from_spec(&DramArchSpec::ddr2()),
        2 => ChainModel::from_spec(&DramArchSpec::lpddr2()),
        _ => {
            let m = rng.random_range(1..=max_m);
            random_model(rng, m)
        }
    }
}

/// Monotone timeouts with some states disabled.
pub fn random_config(rng: &mut ChaCha8Rng, m: usize, slot: u64) -> DemotionConfig {
    let mut ds: Vec<u64> = (0..m).map(|_| rng.random_range(0..=slot)).collect();
    ds.sort_unstable();
    DemotionConfig::new(ds.into_iter().map(|d| (rng.random_range(0..4) != 0).then_some(d)).collect())
}

/// Dense counts for `distinct` random lengths in `1..=slot`.
pub fn random_counts(rng: &mut ChaCha8Rng, slot: u64, distinct: usize) -> Vec<u64> {
    let mut counts = vec![0u64; slot as usize + 1];
    for _ in 0..distinct {
        let len = rng.random_range(1..=slot) as usize;
        counts[len] += rng.random_range(1..20);
    }
    counts
}

/// Pages common to `rank` and `group`.
pub fn overlap(rank: &[u64], group: &[u64]) -> usize {
    rank.iter().filter(|p| group.contains(p)).count()
}

/// Fewest pages moved over all `R!` group-to-rank assignments.
pub fn brute_min_migrations(prev: &[Vec<u64>], groups: &[Vec<u64>]) -> usize {
    let total: usize = groups.iter().map(Vec::len).sum();
    let r = prev.len();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let kept: usize = (0..r).map(|g| overlap(&prev[p[g]], &groups[g])).sum();
        best = best.max(kept);
    });
    total - best
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Every edge covered exactly once, and no rank sends or receives twice
/// within a segment.
pub fn check_schedule(graph: &MigrationGraph, schedule: &MigrationSchedule) -> Result<(), String> {
    let key = |m: &Migration| (m.src, m.dst, m.page);
    let mut want: BTreeMap<(usize, usize, u64), i64> = BTreeMap::new();
    for e in &graph.edges {
        *want.entry(key(e)).or_default() += 1;
    }
    for (i, seg) in schedule.segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(format!("segment {i} is empty"));
        }
        let mut outs = vec![0; graph.ranks];
        let mut ins = vec![0; graph.ranks];
        for m in seg {
            outs[m.src] += 1;
            ins[m.dst] += 1;
            *want.entry(key(m)).or_default() -= 1;
        }
        if outs.iter().chain(&ins).any(|&d| d > 1) {
            return Err(format!("segment {i} uses a rank twice: {seg:?}"));
        }
    }
    match want.iter().find(|(_, &n)| n != 0) {
        Some((e, n)) => Err(format!("edge {e:?} covered {} times", 1 - n)),
        None => Ok(()),
    }
}

pub struct Workload {
    pub trace: Vec<MemoryAccess>,
    pub params: SimParams,
}

/// Bimodal hot/cold trace for the policy comparison: 10% of 400 pages take
/// 90% of the accesses; desk-scale slot, 10-slot epochs, 8 ranks of 50 pages,
/// 100 slots.
pub fn bimodal_workload(seed: u64) -> Workload {
    let tp = SyntheticTraceParams {
        total_cycles: 100_000_000,
        num_pages: 400,
        hot_fraction: 0.1,
        hot_access_share: 0.9,
        access_rate: 3e-5,
        seed,
        ..Default::default()
    };
    let mut params = SimParams::desk_scale();
    params.ranks = 8;
    params.capacity_pages = 50;
    params.trace_cycles = Some(tp.total_cycles);
    Workload { trace: generate_synthetic_trace(&tp).expect("valid params"), params }
}

/// Stationary bimodal trace with `10^7`-cycle slots, 40 slots.
pub fn stationary_workload(seed: u64) -> Workload {
    let slot = 10_000_000;
    let tp = SyntheticTraceParams {
        total_cycles: 40 * slot,
        num_pages: 800,
        hot_fraction: 0.1,
        hot_access_share: 0.9,
        access_rate: 1e-3,
        seed,
        ..Default::default()
    };
    let mut params = SimParams { slot_cycles: slot, ..SimParams::default() };
    params.ranks = 8;
    params.capacity_pages = 100;
    params.trace_cycles = Some(tp.total_cycles);
    Workload { trace: generate_synthetic_trace(&tp).expect("valid params"), params }
}

pub fn run(w: &Workload, spec: &DramArchSpec, policy: Policy, rzsd: Option<usize>) -> SimMetrics {
    let mut p = w.params.clone();
    p.policy = policy;
    p.rzsd_state = rzsd.map(|i| i.to_string());
    run_simulation(&w.trace, spec, &p).expect("simulation runs")
}

pub fn normalized_ed2(m: &SimMetrics, base: &SimMetrics) -> f64 {
    compute_ed2(m, Some(base)).expect("baseline present").ed2
}
