mod common;

use coarse_auction::dist::{seeded_rng, DiscreteDistribution, EpsGrid, ProductDistribution};
use coarse_auction::fixtures::{iid_per_profile_check, random_reserve_ironed};
use coarse_auction::iid::*;
use coarse_auction::par::Execution;
use coarse_auction::revenue::{brute_force_opt, brute_force_revenue, exact_revenue_single_item};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn per_profile_loss_is_below_eps() {
    let r = iid_per_profile_check(20_000, 17);
    assert_eq!(r.failures, 0, "worst margin {}", r.worst_margin);
}

#[test]
fn flags_roundtrip() {
    let mut rng = seeded_rng(8);
    for _ in 0..500 {
        let h = rng.gen_range(1..=3) as f64;
        let n = rng.gen_range(1..=4);
        let grid = EpsGrid::new([0.1, 0.2, 0.25, 0.3][rng.gen_range(0..4)], h).unwrap();
        let a = random_reserve_ironed(&mut rng, n, h).round_down(&grid);
        let flags = encode_flags(&a, &grid).unwrap();
        assert_eq!(decode_flags(&flags, &grid, n).unwrap(), a);
        assert_eq!(ReserveIronedAuction::from_text(&a.to_text()).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn reserve_ironed_matches_symmetric_myersonian(f in dist_strategy(1.0, 4), n in 1usize..=3) {
        let a = optimal_reserve_ironed(&f, n).unwrap();
        let m = symmetric_myersonian(&f, n).unwrap();
        let prod = ProductDistribution::iid(f.clone(), n).unwrap();
        for (v, _) in profiles(&prod) {
            prop_assert!((a.run(&v).revenue() - m.run(&v).revenue()).abs() < 1e-12, "{:?}", v);
        }
        let ra = brute_force_revenue(&a, &prod, Execution::Sequential).unwrap();
        let rm = exact_revenue_single_item(&m, &prod).unwrap();
        prop_assert!((ra - rm).abs() < 1e-12);
    }

    #[test]
    fn reserve_ironed_is_optimal(f in dist_strategy(1.0, 3)) {
        let prod = ProductDistribution::iid(f.clone(), 2).unwrap();
        let a = optimal_reserve_ironed(&f, 2).unwrap();
        let r = brute_force_revenue(&a, &prod, Execution::Sequential).unwrap();
        let opt = brute_force_opt(&prod).unwrap().revenue;
        prop_assert!((r - opt).abs() < 1e-9, "{} vs {}", r, opt);
    }
}

#[test]
fn two_point_plateau_is_ironed() {
    let f = DiscreteDistribution::uniform_over(&[1.0, 2.0], 2.0).unwrap();
    let a = optimal_reserve_ironed(&f, 2).unwrap();
    let prod = ProductDistribution::iid(f, 2).unwrap();
    let r = brute_force_revenue(&a, &prod, Execution::Sequential).unwrap();
    assert!((r - 1.5).abs() < 1e-12);
}

#[test]
fn sample_sizes_grow_as_eps_shrinks() {
    let a = sample_size_iid(1.0, 2, 0.2, 0.1).unwrap();
    let b = sample_size_iid(1.0, 2, 0.1, 0.1).unwrap();
    assert!(b > a);
    assert!(uniform_sample_size_iid(1.0, 2, 0.1, 0.1).unwrap() >= b);
}
