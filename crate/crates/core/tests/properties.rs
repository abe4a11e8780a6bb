mod common;

use ahd_core::ast_metric::{normalize, tsed, SimilarityMatrix};
use ahd_core::config::{RunConfig, TransportKind};
use ahd_core::engine::{
    Engine, GlobalArchive, IslandState, MigrationMode, NoPersist, RunState, TelemetryRecord,
};
use ahd_core::problems::{bpp, generate_instances, kp, oracle, tsp, Instance, ProblemKind, Scale};
use ahd_core::scheduler::SchedulerState;
use ahd_core::tuner::{build_trust_region, de_trial, init_micro_population, tune, TunerConfig};
use common::programs::random_program;
use common::scenario::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn program(seed: u64) -> String {
    random_program(&mut ChaCha8Rng::seed_from_u64(seed)).render()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_deterministic(seed in any::<u64>()) {
        let src = program(seed);
        prop_assert_eq!(normalize(&src).unwrap(), normalize(&src).unwrap());
    }

    #[test]
    fn literal_values_never_change_similarity(a in any::<u64>(), b in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(a);
        let p = random_program(&mut rng);
        let mut q = p.clone();
        for piece in &mut q.pieces {
            if let common::programs::Piece::Num(v) = piece {
                *v = (*v * 3.0 + 1.0).abs();
            }
        }
        let other = normalize(&program(b)).unwrap();
        let (tp, tq) = (normalize(&p.render()).unwrap(), normalize(&q.render()).unwrap());
        prop_assert_eq!(tsed(&tp, &other).to_bits(), tsed(&tq, &other).to_bits());
    }

    #[test]
    fn tsed_is_bounded_and_one_only_for_identical_trees(a in any::<u64>(), b in any::<u64>()) {
        let (ta, tb) = (normalize(&program(a)).unwrap(), normalize(&program(b)).unwrap());
        let s = tsed(&ta, &tb);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s == 1.0, ta.to_sexpr() == tb.to_sexpr());
    }

    #[test]
    fn similarity_matrices_are_symmetric(seeds in prop::collection::vec(prop::collection::vec(any::<u64>(), 1..4), 2..5)) {
        let islands: Vec<Vec<_>> = seeds.iter().map(|s| s.iter().map(|&x| normalize(&program(x)).unwrap()).collect()).collect();
        let m = SimilarityMatrix::compute(&islands).unwrap();
        for i in 0..m.len() {
            prop_assert!((0.0..=1.0).contains(&m.get(i, i)));
            for j in 0..m.len() {
                prop_assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn generators_are_deterministic(kind in prop::sample::select(vec![ProblemKind::Tsp, ProblemKind::Kp, ProblemKind::BppOnline]), n in 5usize..40, seed in any::<u64>()) {
        let a = generate_instances(kind, Scale::new(n), 3, seed).unwrap();
        let b = generate_instances(kind, Scale::new(n), 3, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn constructed_solutions_are_feasible_and_never_beat_the_oracle(n in 4usize..11, seed in any::<u64>()) {
        let set = generate_instances(ProblemKind::Tsp, Scale::new(n), 2, seed).unwrap();
        for inst in &set.instances {
            let Instance::Tsp(t) = inst else { unreachable!() };
            for start in 0..n {
                let tour = tsp::construct(&mut tsp::NearestNeighbor, t, start).unwrap();
                let mut sorted = tour.clone();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
                prop_assert!(t.tour_length(&tour) >= oracle(inst).unwrap() - 1e-9);
            }
        }
        let set = generate_instances(ProblemKind::Kp, Scale::new(n + 8), 2, seed).unwrap();
        for inst in &set.instances {
            let Instance::Kp(k) = inst else { unreachable!() };
            let picked = kp::construct(&mut kp::DensityGreedy, k).unwrap();
            prop_assert!(picked.iter().map(|&i| k.weights[i]).sum::<f64>() <= k.capacity + 1e-9);
            prop_assert!(kp::evaluate(&mut kp::DensityGreedy, k).unwrap() <= oracle(inst).unwrap() + 1e-9);
        }
        let set = generate_instances(ProblemKind::BppOnline, Scale::new(n * 20), 1, seed).unwrap();
        let Instance::Bpp(s) = &set.instances[0] else { unreachable!() };
        prop_assert!(bpp::evaluate(&mut bpp::FirstFit, s).unwrap() >= s.lower_bound());
        prop_assert!(bpp::evaluate(&mut bpp::BestFit, s).unwrap() >= s.lower_bound());
    }

    #[test]
    fn scheduler_values_stay_in_the_unit_interval(rewards in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let mut s = SchedulerState::new(std::f64::consts::SQRT_2);
        for (t, r) in rewards.iter().enumerate() {
            let i = s.select_index();
            prop_assert_eq!(i, s.select_index());
            if t < s.arms.len() {
                prop_assert_eq!(s.arms[i].n, 0);
            }
            s.update_index(i, *r);
            prop_assert!(s.arms.iter().all(|a| (0.0..=1.0).contains(&a.q)));
        }
        prop_assert_eq!(s.total, rewards.len() as u64);
    }

    #[test]
    fn tuning_is_monotone_and_contained(x in prop::collection::vec(-5.0f64..5.0, 1..5), seed in any::<u64>(), gens in 0usize..8) {
        let cfg = TunerConfig { generations: gens, ..TunerConfig::default() };
        let region = build_trust_region(&x, cfg.rho, cfg.eps0);
        let f = |v: &[f64]| v.iter().enumerate().map(|(j, p)| (p - j as f64).powi(2)).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut outside = 0;
        let out = tune(&x, f(&x), &cfg, &mut rng, |batch| {
            outside += batch.iter().filter(|v| !region.contains(v)).count();
            batch.iter().map(|v| f(v)).collect()
        });
        prop_assert_eq!(outside, 0);
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(out.best_fitness <= out.initial_fitness);
        prop_assert_eq!(out.evaluations, cfg.n_tune * (gens + 1));
    }

    #[test]
    fn crossover_keeps_at_least_one_mutant_coordinate(x in prop::collection::vec(1.0f64..5.0, 2..6), seed in any::<u64>()) {
        let region = build_trust_region(&x, 0.5, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pop = init_micro_population(&x, &region, 3, &mut rng);
        let trial = de_trial(&pop, 1, 0.5, 0.0, &region, &mut rng).unwrap();
        prop_assert!(region.contains(&trial));
        prop_assert!(trial.iter().zip(&pop[1]).filter(|(a, b)| a != b).count() <= 1);
    }

    #[test]
    fn admission_keeps_populations_sorted_and_capped(objs in prop::collection::vec(-10.0f64..10.0, 1..40), cap in 1usize..10) {
        let mut isl = IslandState::new(0, 0, 1.0);
        for (i, o) in objs.iter().enumerate() {
            isl.admit(member(&quadratic_code(&[i as f64]), *o, 0), cap);
            prop_assert!(isl.population.len() <= cap);
            prop_assert!(isl.population.windows(2).all(|w| w[0].objective <= w[1].objective));
        }
        let mut sorted = objs.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(isl.elite().objective, sorted[0]);
    }

    #[test]
    fn archive_best_never_increases(objs in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let mut archive = GlobalArchive::new(member("x = 1\n", 0.0, 0), 1, 0);
        let mut prev = archive.best.objective;
        for (i, o) in objs.iter().enumerate() {
            archive.offer(&member("x = 1\n", *o, 0), i as u64 + 2, 0);
            prop_assert!(archive.best.objective <= prev);
            prev = archive.best.objective;
        }
        prop_assert!(archive.history.windows(2).all(|w| w[1].best < w[0].best && w[1].evaluations >= w[0].evaluations));
    }

    #[test]
    fn config_round_trips_through_toml(
        kind in prop::sample::select(vec![ProblemKind::Tsp, ProblemKind::Kp, ProblemKind::BppOnline]),
        tau in 0.01f64..0.99,
        n in 1usize..12,
        pop in 2usize..16,
        seed in 0..=i64::MAX as u64,
        theta in 0.0f64..1.0,
    ) {
        let mut cfg = RunConfig::for_problem(kind);
        cfg.islands.tau = tau;
        cfg.islands.n = n;
        cfg.islands.pop = pop;
        cfg.master_seed = seed;
        cfg.tuner.theta = theta;
        let cfg = cfg.resolved();
        prop_assert!(cfg.validate().is_ok());
        let back = RunConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), cfg.to_toml());
    }

    #[test]
    fn seeds_beyond_toml_integers_are_rejected(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let mut cfg = RunConfig::for_problem(ProblemKind::Tsp);
        cfg.master_seed = seed;
        prop_assert!(cfg.validate().is_err());
    }
}

const POOL: &[&str] = &[
    "def f(x):\n    return x\n",
    "def f(x):\n    return -x\n",
    "def f(x, y):\n    return x + y\n",
    "while x:\n    pass\n",
    "a = 1\n",
    "def f(x):\n    if x:\n        return 1\n    return 2\n",
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn migration_mode_follows_threshold_and_scopes_its_effect(
        layout in prop::collection::vec((prop::collection::vec(0usize..POOL.len(), 2..4), 0u32..5, prop::option::of(0u64..4)), 2..5),
        tau in 0.05f64..0.95,
        s_mig in 1u32..4,
    ) {
        let gw = scripted(|_| Ok("Prefer the elite's shape.".into()));
        let ev = quadratic_evaluator();
        let mut cfg = small_config(layout.len(), 4);
        cfg.islands.tau = tau;
        cfg.islands.s_mig = s_mig;
        let cool = cfg.islands.i_cool;
        let engine = Engine::new(cfg, quadratic_problem(), &gw, &ev);
        let mut islands: Vec<IslandState> = layout
            .iter()
            .enumerate()
            .map(|(i, (codes, stag, last))| {
                let mut isl = IslandState::new(i, 3, 1.0);
                isl.population = codes.iter().enumerate().map(|(k, &c)| member(POOL[c], (i * 10 + k) as f64, i)).collect();
                isl.stagnation = *stag;
                isl.last_migration = *last;
                isl
            })
            .collect();
        let before = islands.clone();
        let g = 5;
        let recs = engine.coordinate_migration(&mut islands, g).unwrap();
        for r in &recs {
            let TelemetryRecord::Migration(e) = r else { continue };
            let codes = |isl: &IslandState| isl.codes().iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let (t, s) = (e.target, e.source);
            prop_assert!(before[t].stagnation >= s_mig);
            prop_assert!(before[t].last_migration.is_none_or(|l| g >= l + cool));
            let sa: Vec<&str> = before[t].codes();
            let sb: Vec<&str> = before[s].codes();
            let m = ahd_core::ast_metric::island_similarity(&sa, &sb).unwrap();
            prop_assert!((m - e.m).abs() < 1e-12);
            prop_assert_eq!(e.mode == MigrationMode::CodeTransfer, e.m > tau);
            match e.mode {
                MigrationMode::CodeTransfer => {
                    prop_assert_eq!(&islands[t].neighbor_insight, &before[t].neighbor_insight);
                    prop_assert!(codes(&islands[t]).contains(&before[s].elite().code));
                }
                MigrationMode::InsightTransfer => {
                    prop_assert_eq!(codes(&islands[t]), codes(&before[t]));
                    prop_assert!(islands[t].neighbor_insight.is_some());
                }
            }
            prop_assert!(islands[t].elite().objective <= before[t].elite().objective);
        }
        for (i, isl) in islands.iter().enumerate() {
            let migrated = recs.iter().any(|r| matches!(r, TelemetryRecord::Migration(e) if e.target == i));
            if !migrated {
                prop_assert_eq!(isl.codes(), before[i].codes());
                prop_assert_eq!(&isl.neighbor_insight, &before[i].neighbor_insight);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn synthetic_runs_respect_engine_invariants(seed in any::<u64>(), i_stag in 2u32..5, tau in 0.3f64..0.95) {
        let mut cfg = RunConfig::for_problem(ProblemKind::Tsp);
        cfg.master_seed = seed;
        cfg.problem.n = Some(8);
        cfg.problem.train_count = Some(2);
        cfg.islands.n = 3;
        cfg.islands.pop = 4;
        cfg.islands.s_mig = 1;
        cfg.islands.i_stag = i_stag;
        cfg.islands.tau = tau;
        cfg.llm.transport = TransportKind::Synthetic;
        cfg.llm.synthetic_failure_rate = 0.2;
        cfg.budget.generations = 8;
        let cfg = cfg.resolved();
        let set = cfg.training_set().unwrap();
        let ev = cfg.build_evaluator(&set).unwrap();
        let gw = cfg.build_gateway().unwrap();
        let engine = Engine::new(cfg.clone(), ahd_core::engine::ProblemSetup::for_kind(ProblemKind::Tsp), &gw, ev.as_ref());
        let out = engine.run(None, &mut NoPersist).unwrap();
        let mut last_best = f64::INFINITY;
        let mut elites = vec![f64::INFINITY; cfg.islands.n];
        for r in &out.telemetry {
            match r {
                TelemetryRecord::Convergence { best, .. } => {
                    prop_assert!(*best <= last_best);
                    last_best = *best;
                }
                TelemetryRecord::Migration(e) => prop_assert_eq!(e.mode == MigrationMode::CodeTransfer, e.m > tau),
                TelemetryRecord::Reset(e) => prop_assert!(e.stagnation >= i_stag),
                TelemetryRecord::Generation(row) => {
                    prop_assert!(row.elite <= elites[row.island]);
                    prop_assert!(row.elite <= row.worst);
                    elites[row.island] = row.elite;
                }
                _ => {}
            }
        }
        for isl in &out.state.islands {
            prop_assert!(isl.population.len() <= cfg.islands.pop);
            prop_assert!(isl.population.windows(2).all(|w| w[0].objective <= w[1].objective));
        }
        let json = serde_json::to_string(&out.state).unwrap();
        let mut back: RunState = serde_json::from_str(&json).unwrap();
        back.rebuild_caches();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
