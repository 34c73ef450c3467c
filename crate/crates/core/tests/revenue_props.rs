mod common;

use coarse_auction::dist::{DiscreteDistribution, EpsGrid, ProductDistribution};
use coarse_auction::myerson::SingleItemAuction;
use coarse_auction::par::Execution;
use coarse_auction::revenue::{brute_force_revenue, exact_revenue_single_item};
use coarse_auction::rounding::{draw_randomized_rule, apply_rule};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn exact_equals_brute_force(f in product_strategy(1..=4, 1.0, 4)) {
        let a = SingleItemAuction::optimal(&f);
        let e = exact_revenue_single_item(&a, &f).unwrap();
        let b = brute_force_revenue(&a, &f, Execution::Sequential).unwrap();
        prop_assert!((e - b).abs() < 1e-12, "{} vs {}", e, b);
    }

    /// Auctions whose virtual values come from a different distribution, then
    /// rounded, so that breakpoints off the support matter.
    #[test]
    fn exact_equals_brute_force_for_mismatched_rounded(
        f in product_strategy(2..=3, 1.0, 4),
        seed in any::<u64>(),
        eps_k in 1usize..=4,
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = ProductDistribution::new(
            (0..f.n()).map(|_| random_dist_real(&mut rng, 1.0, 4)).collect()
        ).unwrap();
        let grid = EpsGrid::new(0.125 * eps_k as f64, 1.0).unwrap();
        let a = apply_rule(&SingleItemAuction::optimal(&g), &draw_randomized_rule(&g, &grid, &mut rng)).unwrap();
        let e = exact_revenue_single_item(&a, &f).unwrap();
        let b = brute_force_revenue(&a, &f, Execution::Sequential).unwrap();
        prop_assert!((e - b).abs() < 1e-12, "{} vs {}", e, b);
    }
}

#[test]
fn dummy_reserve_loses_ties() {
    // φ = 0 at the low value: the bidder still wins against the reserve
    let f = ProductDistribution::new(vec![DiscreteDistribution::uniform_over(&[1.0, 2.0], 2.0).unwrap()]).unwrap();
    let a = SingleItemAuction::optimal(&f);
    assert_eq!(a.run(&[1.0]).pay, vec![1.0]);
    assert!((exact_revenue_single_item(&a, &f).unwrap() - 1.0).abs() < 1e-15);
}
