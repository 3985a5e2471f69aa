mod common;

use common::*;
use ramzzz_core::{
    demotion::{idle_energy, objective_value, exhaustive_config, total_delay, total_energy, ChainModel, SolveOptions},
    engine::{compute_ed2, run_traced, EngineError},
    run_simulation,
    trace::generate_synthetic_trace,
    DramArchSpec, MemoryAccess, Objective, Policy, SimParams, SyntheticTraceParams,
};

const T: u64 = 1_000_000;

fn params(ranks: usize, capacity: usize, policy: Policy, slots: u64) -> SimParams {
    let mut p = SimParams::desk_scale();
    p.ranks = ranks;
    p.capacity_pages = capacity;
    p.policy = policy;
    p.trace_cycles = Some(slots * T);
    p
}

/// Energy closure recomputed from the reported residency.
fn closure_energy(m: &ramzzz_core::SimMetrics, spec: &DramArchSpec) -> f64 {
    let idle: f64 = m.residency.iter().zip(&spec.states).map(|(&t, s)| t as f64 * s.normalized_power).sum();
    idle + (m.others.service + m.others.remap) as f64 * spec.act_power()
        + m.resync_energy
        + m.migration_energy
        + m.mq_energy
}

#[test]
fn base_stays_active() {
    let w = bimodal_workload(3);
    let spec = DramArchSpec::ddr3();
    let m = run(&w, &spec, Policy::Base, None);
    assert!(m.residency[1..].iter().all(|&t| t == 0));
    assert_eq!(m.delay.resync, 0);
    assert_eq!(m.migrated_pages, 0);
    assert_eq!(m.exec_time, w.params.trace_cycles.unwrap());
    let n = compute_ed2(&m, Some(&m)).unwrap();
    assert_eq!(n.ed2, 1.0);
}

#[test]
fn residency_and_energy_close_for_every_policy() {
    let w = bimodal_workload(5);
    let spec = DramArchSpec::ddr3();
    for policy in Policy::ALL {
        let m = run(&w, &spec, policy, (policy == Policy::Rzsd).then_some(3));
        for (r, rank) in m.ranks.iter().enumerate() {
            let sum: u64 = rank.residency.iter().sum::<u64>() + rank.others.total();
            assert_eq!(sum, m.exec_time, "{policy} rank {r}");
        }
        let e = closure_energy(&m, &spec);
        assert!((e - m.total_energy).abs() <= 1e-9 * m.total_energy, "{policy}: {e} vs {}", m.total_energy);
        assert_eq!(m.exec_time, w.params.trace_cycles.unwrap() + m.delay.total(), "{policy}");
    }
}

#[test]
fn transitions_follow_the_chain() {
    let w = bimodal_workload(9);
    let spec = DramArchSpec::ddr3();
    for policy in [Policy::Ramzzz, Policy::Rzsp, Policy::Oracle] {
        let mut p = w.params.clone();
        p.policy = policy;
        let (m, log) = run_traced(&w.trace, &spec, &p).unwrap();
        assert_eq!(log.len(), p.ranks);
        let ups: u64 = log.iter().flatten().filter(|(_, to)| *to == 0).count() as u64;
        assert_eq!(ups, m.ranks.iter().map(|r| r.resyncs).sum::<u64>());
        for (from, to) in log.iter().flatten() {
            assert!(*to > *from || (*to == 0 && *from > 0), "{policy}: illegal {from} -> {to}");
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let spec = DramArchSpec::ddr3();
    let a = run(&bimodal_workload(11), &spec, Policy::Ramzzz, None);
    let b = run(&bimodal_workload(11), &spec, Policy::Ramzzz, None);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn empty_trace_demotes_once_through_the_chain() {
    let spec = DramArchSpec::ddr3();
    let model = ChainModel::from_spec(&spec);
    let p = params(2, 4, Policy::Ramzzz, 2);
    let (m, log) = run_traced(&[], &spec, &p).unwrap();
    // slot 0 runs without history, slot 1 uses the solved configuration
    let cfg = &m.slots[1].configs[0];
    assert!(cfg.active_states().iter().all(|&(_, d)| d == 0), "{cfg:?}");
    let per_rank = T as f64 * spec.act_power() + idle_energy(cfg, T, &model).unwrap();
    assert!((m.total_energy - 2.0 * per_rank).abs() < 1e-6, "{} vs {}", m.total_energy, 2.0 * per_rank);
    let deepest = cfg.deepest_reached(T).unwrap() + 1;
    for rank_log in &log {
        assert!(rank_log.windows(2).all(|w| w[0].1 == w[1].0 && w[1].1 > w[0].1));
        assert_eq!(rank_log.last().unwrap().1, deepest);
    }
    assert_eq!(m.delay.resync, 0);
}

#[test]
fn single_access_pays_one_resync() {
    let spec = DramArchSpec::ddr3();
    let p = params(1, 4, Policy::Ramzzz, 3);
    let trace = [MemoryAccess::new(T + T / 2, 0, false)];
    let (m, _) = run_traced(&trace, &spec, &p).unwrap();
    let cfg = &m.slots[1].configs[0];
    // the access ends an idle period that started at cycle 0
    let reached = cfg.deepest_reached(T + T / 2).expect("rank demoted") + 1;
    assert_eq!(m.ranks[0].resyncs, 1);
    assert_eq!(m.delay.resync, spec.resync_cycles(reached).unwrap());
}

#[test]
fn rzsd_deepest_state_on_short_idles_stays_active() {
    let spec = DramArchSpec::ddr3();
    let p = {
        let mut p = params(1, 4, Policy::Rzsd, 20);
        p.rzsd_state = Some("SR_SLOW".into());
        p
    };
    // one access every 300 cycles: 100-cycle idle periods
    let trace: Vec<MemoryAccess> = (0..20 * T / 300).map(|i| MemoryAccess::new(i * 300, i % 4, false)).collect();
    let m = run_simulation(&trace, &spec, &p).unwrap();
    let base = run_simulation(&trace, &spec, &SimParams { policy: Policy::Base, ..p.clone() }).unwrap();
    let n = compute_ed2(&m, Some(&base)).unwrap();
    // only the remap lookups separate it from BASE
    assert!((n.energy - 1.0).abs() < 0.02, "{n:?}");
    assert_eq!(m.delay.resync, 0);
    for s in &m.slots {
        assert!(s.configs[0].timeouts[4].is_none_or(|d| d >= 100), "{:?}", s.configs[0]);
    }
}

#[test]
fn migration_deepens_cold_ranks() {
    let w = bimodal_workload(13);
    let spec = DramArchSpec::ddr3();
    let rz = run(&w, &spec, Policy::Ramzzz, None);
    let sp = run(&w, &spec, Policy::Rzsp, None);
    // deepest-state residency summed over all but the busiest rank
    let cold_deep = |m: &ramzzz_core::SimMetrics| {
        let mut ranks: Vec<_> = m.ranks.iter().collect();
        ranks.sort_by_key(|r| std::cmp::Reverse(r.accesses));
        ranks[1..].iter().map(|r| *r.residency.last().unwrap()).sum::<u64>()
    };
    assert!(cold_deep(&rz) > cold_deep(&sp), "{} vs {}", cold_deep(&rz), cold_deep(&sp));
    assert!(rz.migrated_pages > 0);
    let base = run(&w, &spec, Policy::Base, None);
    assert!(normalized_ed2(&rz, &base) < 1.0);
}

#[test]
fn solver_beats_predicted_config_on_actual_histograms() {
    let mut w = bimodal_workload(17);
    w.params.record_histograms = true;
    let spec = DramArchSpec::ddr3();
    let model = ChainModel::from_spec(&spec);
    let m = run(&w, &spec, Policy::Ramzzz, None);
    let opts = SolveOptions::new(w.params.delay_budget(), Objective::Ed2, T as f64);
    for s in m.slots.iter().filter(|s| s.slot > 0) {
        let h = s.histograms.as_ref().unwrap();
        for (cfg, actual) in s.configs.iter().zip(&h.actual) {
            let Ok(best) = exhaustive_config(actual, &model, &opts) else { continue };
            let e = total_energy(cfg, actual, &model).unwrap();
            let d = total_delay(cfg, actual, &model).unwrap();
            if d <= opts.budget {
                assert!(best.objective <= objective_value(e, d, T as f64, Objective::Ed2) * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn recorded_slots_fit_in_the_slot() {
    let mut w = bimodal_workload(19);
    w.params.record_histograms = true;
    let g = w.params.access_latency;
    let m = run(&w, &DramArchSpec::ddr3(), Policy::Ramzzz, None);
    for s in &m.slots {
        for a in &s.histograms.as_ref().unwrap().actual {
            assert!(a.buckets.iter().map(|(l, c)| *l as f64 * c).sum::<f64>() <= T as f64);
            let long = a.buckets.iter().filter(|(l, _)| *l > 1000).map(|(_, c)| c).sum::<f64>();
            assert!(long <= 1000.0);
            assert!(a.occupied_time(g) <= 2.0 * T as f64);
        }
    }
}

#[test]
fn page_swap_prediction_is_close() {
    // pages 0 and 2 start on rank 0, 1 and 3 on rank 1; 0 and 1 are hot,
    // so the first epoch swaps a hot page with a cold one
    let spec = DramArchSpec::ddr3();
    let slot = 10 * T;
    let mut p = params(2, 2, Policy::Ramzzz, 20);
    p.slot_cycles = slot;
    p.trace_cycles = Some(20 * slot);
    p.record_histograms = true;
    let mut errs = Vec::new();
    for seed in 1..=4 {
        let tp = SyntheticTraceParams {
            total_cycles: 20 * slot,
            num_pages: 4,
            hot_fraction: 0.5,
            hot_access_share: 0.9,
            access_rate: 1e-3,
            seed,
            ..Default::default()
        };
        let m = run_simulation(&generate_synthetic_trace(&tp).unwrap(), &spec, &p).unwrap();
        let s = &m.slots[10];
        assert_eq!(s.migrated_pages, 2);
        let h = s.histograms.as_ref().unwrap();
        let before = &m.slots[9].histograms.as_ref().unwrap().actual;
        let (carry, total) = before
            .iter()
            .zip(&h.actual)
            .map(|(b, a)| b.binned_l1(a))
            .fold((0.0, 0.0), |acc, (l, t)| (acc.0 + l, acc.1 + t));
        let err = s.prediction_error.unwrap();
        assert!(err < 0.5 * carry / total, "seed {seed}: {err} vs carry-forward {}", carry / total);
        errs.push(err);
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean <= 0.2, "{errs:?}");
}

#[test]
fn stationary_prediction_error_is_small() {
    let w = stationary_workload(29);
    let m = run(&w, &DramArchSpec::ddr3(), Policy::Rzsp, None);
    let e = m.mean_prediction_error.unwrap();
    assert!(e < 0.2, "{e}");
}

#[test]
fn bad_inputs_are_rejected() {
    let spec = DramArchSpec::ddr3();
    let p = params(2, 2, Policy::Ramzzz, 1);
    let err = run_simulation(&[MemoryAccess::new(0, 4, false)], &spec, &p).unwrap_err();
    assert!(matches!(err, EngineError::PageOutOfRange { page: 4, pages: 4 }));
    let err = run_simulation(&[], &spec, &SimParams { policy: Policy::Rzsd, ..p.clone() }).unwrap_err();
    assert!(matches!(err, EngineError::MissingRzsdState));
    let err = run_simulation(&[], &spec, &SimParams { rzsd_state: Some("SR_TURBO".into()), policy: Policy::Rzsd, ..p.clone() })
        .unwrap_err();
    assert!(matches!(err, EngineError::UnknownState(_)));
    let unordered = [MemoryAccess::new(9, 1, false), MemoryAccess::new(5, 2, true)];
    assert!(matches!(run_simulation(&unordered, &spec, &p), Err(EngineError::InvalidParams(_))));
    assert!(matches!(compute_ed2(&run_simulation(&[], &spec, &p).unwrap(), None), Err(EngineError::MissingBaseline)));
}
