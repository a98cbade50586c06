mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trusttech::dynsys::{euler_step, grad_norm, Objective, Point};
use trusttech::evo::{blend, ea_run, EvoConfig, EvoVariant, MultiWell};
use trusttech::gmm::{
    e_step, em_fit, gen_synthetic, log_likelihood, random_start, CovKind, EmConfig, SyntheticId,
};
use trusttech::smoothing::{smoothed_em, smoothed_log_likelihood, KernelSpec};
use trusttech::surfaces::MullerBrown;
use trusttech::tiersearch::{tier_search, DirectionStrategy, LbfgsSolver, TierConfig};

fn cov_kind() -> impl Strategy<Value = CovKind> {
    prop_oneof![Just(CovKind::Spherical), Just(CovKind::Diagonal), Just(CovKind::Full)]
}

fn dataset_id() -> impl Strategy<Value = SyntheticId> {
    prop_oneof![
        Just(SyntheticId::Spherical5),
        Just(SyntheticId::Elliptical3),
        Just(SyntheticId::Overlap4)
    ]
}

/// Allows roundoff in a likelihood of magnitude `l`.
fn slack(l: f64) -> f64 {
    1e-9 * l.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_flow_decreases_energy(x in -1.5f64..1.0, y in -0.4f64..2.0) {
        let mb = MullerBrown::new();
        let p = common::pt(&[x, y]);
        prop_assume!(grad_norm(&mb, &p).unwrap() > 1e-3);
        let next = euler_step(&mb, &p, 1e-5).unwrap();
        prop_assert!(mb.value(&next).unwrap() < mb.value(&p).unwrap());
    }

    #[test]
    fn blend_preserves_parent_sum(
        a in proptest::collection::vec(-10f64..10.0, 3),
        b in proptest::collection::vec(-10f64..10.0, 3),
        lambda in 0f64..1.0,
    ) {
        let (p1, p2) = (Point::from_vec(a), Point::from_vec(b));
        let (c1, c2) = blend(&p1, &p2, lambda).unwrap();
        prop_assert!(((&c1 + &c2) - (&p1 + &p2)).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn e_step_rows_are_distributions(
        id in dataset_id(), kind in cov_kind(), data_seed in 0u64..1000, start in 0u64..1000,
    ) {
        let syn = gen_synthetic(id, Some(150), data_seed);
        let k = syn.truth.k();
        let params = random_start(&syn.data, k, kind, &mut ChaCha8Rng::seed_from_u64(start)).unwrap();
        let r = e_step(&params, &syn.data).unwrap();
        for row in r.w.row_iter() {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn em_never_decreases_likelihood(
        id in dataset_id(), kind in cov_kind(), data_seed in 0u64..1000, start in 0u64..1000,
    ) {
        let syn = gen_synthetic(id, Some(150), data_seed);
        let k = syn.truth.k();
        let params = random_start(&syn.data, k, kind, &mut ChaCha8Rng::seed_from_u64(start)).unwrap();
        let cfg = EmConfig { max_iter: 200, ..EmConfig::default() };
        // an emptied component is reported as an error under the default policy
        let fit = match em_fit(&params, &syn.data, &cfg) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        for w in fit.trajectory.windows(2) {
            prop_assert!(w[1] >= w[0] - slack(w[0]), "{} -> {}", w[0], w[1]);
        }
        let ll = log_likelihood(&fit.params, &syn.data).unwrap();
        prop_assert!((ll - fit.log_likelihood()).abs() < 1e-6 * ll.abs());
    }

    #[test]
    fn smoothed_em_never_decreases_smoothed_likelihood(
        kind in cov_kind(), data_seed in 0u64..1000, start in 0u64..1000, level in 0f64..2.0,
    ) {
        let syn = gen_synthetic(SyntheticId::Elliptical3, Some(150), data_seed);
        let params = random_start(&syn.data, 3, kind, &mut ChaCha8Rng::seed_from_u64(start)).unwrap();
        let kernel = KernelSpec::additive(level);
        let cfg = EmConfig { max_iter: 200, ..EmConfig::default() };
        let fit = match smoothed_em(&params, &syn.data, &kernel, &cfg) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        for w in fit.trajectory.windows(2) {
            prop_assert!(w[1] >= w[0] - slack(w[0]), "{} -> {}", w[0], w[1]);
        }
        let l0 = smoothed_log_likelihood(&params, &syn.data, &KernelSpec::none()).unwrap();
        prop_assert_eq!(l0, log_likelihood(&params, &syn.data).unwrap());
    }

    #[test]
    fn tier_search_set_invariants(x in -4.5f64..4.5, y in -4.5f64..4.5, seed in 0u64..1000) {
        let obj = MultiWell;
        let solver = LbfgsSolver::new(&obj);
        let cfg = TierConfig {
            step: 0.05,
            max_tiers: 2,
            scale_steps: false,
            strategy: DirectionStrategy::Random { n: Some(4) },
            seed,
            ..TierConfig::default()
        };
        let set = tier_search(&obj, &common::pt(&[x, y]), &solver, &cfg).unwrap();
        let sols = &set.solutions;
        prop_assert_eq!(sols.iter().filter(|s| s.tier == 0).count(), 1);
        for w in sols.windows(2) {
            prop_assert!(w[0].value <= w[1].value);
        }
        for (i, s) in sols.iter().enumerate() {
            prop_assert!(grad_norm(&obj, &s.point).unwrap() < 1e-4);
            match s.parent {
                None => prop_assert_eq!(s.tier, 0),
                Some(p) => prop_assert_eq!(sols[p].tier + 1, s.tier),
            }
            for t in &sols[i + 1..] {
                prop_assert!((&s.point - &t.point).norm() >= set.dedup_tol);
            }
        }
        prop_assert_eq!(set.best().unwrap().value, sols[0].value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evo_keeps_size_and_best(seed in 0u64..10_000, pop_size in 4usize..12) {
        let cfg = EvoConfig {
            pop_size,
            generations: 15,
            variant: EvoVariant::Mutate,
            seed,
            ..EvoConfig::default()
        };
        let r = ea_run(&MultiWell, &cfg, &MultiWell::BOUNDS, None).unwrap();
        prop_assert_eq!(r.population.len(), pop_size);
        prop_assert_eq!(r.history.len(), cfg.generations + 1);
        for w in r.history.windows(2) {
            prop_assert!(w[1].best_value <= w[0].best_value);
        }
        prop_assert_eq!(r.best.value, r.history.last().unwrap().best_value);
        let again = ea_run(&MultiWell, &cfg, &MultiWell::BOUNDS, None).unwrap();
        prop_assert_eq!(again.best.value, r.best.value);
        prop_assert_eq!(again.best.point, r.best.point);
    }
}
