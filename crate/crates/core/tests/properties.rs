mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng};
use ramzzz_core::{
    demotion::{greedy_config, total_delay, total_energy, SolveOptions},
    engine::run_simulation,
    placement::{
        apply_schedule, build_migration_graph, eulerian_schedule, group_ordered, match_groups_to_ranks, plan_migration, remap_lookup,
        MigrationCost, Placement, RemapTable,
    },
    predictor::predict_after_migration,
    trace::{parse_trace, write_trace},
    DramArchSpec, MemoryAccess, MqStructure, Objective, Policy, SparseHistogram, SyntheticTraceParams,
};

fn random_placement(rng: &mut rand_chacha::ChaCha8Rng, ranks: usize, capacity: usize, pages: u64) -> Placement {
    let mut prev = Placement::new(ranks, capacity).unwrap();
    for p in 0..pages {
        let open: Vec<usize> = (0..ranks).filter(|&r| prev.pages_of(r).len() < capacity).collect();
        prev.insert(p, open[rng.random_range(0..open.len())]).unwrap();
    }
    prev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chain_totals_match_dense_walk(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_chain(&mut rng, 5);
        let slot = rng.random_range(1..=3000u64);
        let counts = random_counts(&mut rng, slot, 12);
        let cfg = random_config(&mut rng, model.len(), slot);
        let hist = sparse_from_dense(slot, &counts);
        let (e, d) = dense_totals(&cfg, &counts, &model);
        let got = total_energy(&cfg, &hist, &model).unwrap();
        prop_assert!((got - e).abs() <= 1e-9 * e.max(1.0), "{} vs {}", got, e);
        prop_assert_eq!(total_delay(&cfg, &hist, &model).unwrap(), d);
    }

    #[test]
    fn greedy_is_feasible_and_monotone(seed in any::<u64>(), ed2 in any::<bool>(), frac in 0.0f64..0.2) {
        let mut rng = rng(seed);
        let model = random_chain(&mut rng, 5);
        let slot = rng.random_range(100..=1_000_000u64);
        let hist = SparseHistogram::from_pairs(slot, (0..rng.random_range(0..25)).map(|_| (rng.random_range(1..=slot), rng.random_range(1..30) as f64)));
        let opts = SolveOptions::new(frac * slot as f64, if ed2 { Objective::Ed2 } else { Objective::Energy }, slot as f64);
        let sol = greedy_config(&hist, &model, &opts).unwrap();
        prop_assert!(sol.config.is_monotone());
        prop_assert!(total_delay(&sol.config, &hist, &model).unwrap() <= opts.budget);
    }

    #[test]
    fn planned_migration_realizes_the_groups(seed in any::<u64>(), ranks in 1usize..7, capacity in 1usize..6) {
        let mut rng = rng(seed);
        let pages = rng.random_range(0..=(ranks * capacity) as u64);
        let mut prev = random_placement(&mut rng, ranks, capacity, pages);
        let mut order: Vec<u64> = (0..pages).collect();
        order.shuffle(&mut rng);
        let groups = group_ordered(&order, ranks, capacity).unwrap();
        let mapping = match_groups_to_ranks(&prev, &groups).unwrap();
        let graph = build_migration_graph(&prev, &groups, &mapping).unwrap();
        let schedule = eulerian_schedule(&graph).unwrap();
        prop_assert!(check_schedule(&graph, &schedule).is_ok());
        prop_assert_eq!(schedule.num_migrations(), plan_migration(&prev, &order).unwrap().num_migrations());

        let mut remap = RemapTable::new(ranks);
        for p in 0..pages {
            remap.set(p, prev.rank_of(p).unwrap());
        }
        apply_schedule(&mut remap, &schedule, &MigrationCost::default());
        prev.apply(&schedule).unwrap();
        prop_assert!(prev.is_consistent());
        for (g, group) in groups.iter().enumerate() {
            for &p in group {
                prop_assert_eq!(prev.rank_of(p), Some(mapping[g]));
                prop_assert_eq!(remap_lookup(&remap, p), mapping[g]);
            }
        }
    }

    #[test]
    fn prediction_occupies_the_slot(seed in any::<u64>(), q_old in 0.0f64..1.0, q_new in 0.0f64..1.0) {
        let mut rng = rng(seed);
        let slot = rng.random_range(1_000..=100_000_000u64);
        let g = rng.random_range(1..=400u64);
        let prev = SparseHistogram::from_pairs(slot, (0..rng.random_range(1..30)).map(|_| (rng.random_range(1..=slot / 10), rng.random_range(1..100) as f64)));
        let pred = predict_after_migration(&prev, q_old, q_new, g);
        prop_assert!((pred.occupied_time(g) - slot as f64).abs() <= 1e-6 * slot as f64);
        prop_assert!(pred.buckets.iter().all(|&(_, c)| c >= 0.0));
        prop_assert!(pred.buckets.iter().all(|b| prev.buckets.iter().any(|a| a.0 == b.0)));
    }

    #[test]
    fn mq_keeps_each_page_once(accesses in prop::collection::vec((0u64..50, 0u64..200), 0..400)) {
        let mut mq = MqStructure::new(6, 300);
        let mut now = 0;
        for (page, gap) in accesses {
            now += gap;
            mq.expire(now);
            mq.on_access(page, now);
        }
        let order = mq.hotness_order();
        let unique: BTreeSet<u64> = order.iter().copied().collect();
        prop_assert_eq!(unique.len(), order.len());
        prop_assert_eq!(order.len(), mq.len());
        let by_queue: usize = (0..6).map(|q| mq.queue(q).len()).sum();
        prop_assert_eq!(by_queue, mq.len());
        for q in 0..6 {
            for p in mq.queue(q) {
                prop_assert_eq!(mq.get(p).unwrap().queue_index, q);
            }
        }
    }

    #[test]
    fn trace_csv_round_trips(raw in prop::collection::vec((0u64..1000, 0u64..1 << 40, any::<bool>()), 0..200)) {
        let mut cycle = 0;
        let trace: Vec<MemoryAccess> = raw.into_iter().map(|(gap, page, w)| { cycle += gap; MemoryAccess::new(cycle, page, w) }).collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        prop_assert_eq!(parse_trace(&buf[..]).unwrap(), trace);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn engine_closes_residency_for_random_workloads(seed in any::<u64>(), policy in 0usize..5, rate in 1e-5f64..1e-3) {
        let policy = Policy::ALL[policy];
        let spec = DramArchSpec::ddr3();
        let slot = 100_000;
        let tp = SyntheticTraceParams { total_cycles: 25 * slot, num_pages: 64, access_rate: rate, phase_length: 7 * slot, seed, ..Default::default() };
        let trace = ramzzz_core::trace::generate_synthetic_trace(&tp).unwrap();
        let mut p = ramzzz_core::SimParams { slot_cycles: slot, ranks: 4, capacity_pages: 20, policy, trace_cycles: Some(tp.total_cycles), ..Default::default() };
        p.rzsd_state = (policy == Policy::Rzsd).then(|| "SR_FAST".into());
        let m = run_simulation(&trace, &spec, &p).unwrap();
        prop_assert!(m.exec_time >= tp.total_cycles + m.delay.total());
        for r in &m.ranks {
            prop_assert_eq!(r.residency.iter().sum::<u64>() + r.others.total(), m.exec_time);
        }
        for s in &m.slots {
            prop_assert!(s.configs.iter().all(|c| c.is_monotone()));
        }
    }
}
