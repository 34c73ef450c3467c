mod common;

use coarse_auction::dist::ProductDistribution;
use coarse_auction::myerson::{ironed_virtual_valuation, Level, SingleItemAuction};
use coarse_auction::revenue::{brute_force_opt, exact_revenue_single_item};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ironed_phi_is_nondecreasing_and_bounded(f in dist_strategy(2.0, 6)) {
        let phi = ironed_virtual_valuation(&f);
        let levels: Vec<Level> = f.support().iter().map(|&v| phi.eval(v)).collect();
        prop_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        // φ(v) ≤ v, with equality at the top value
        for (&v, l) in f.support().iter().zip(&levels) {
            prop_assert!(l.finite().unwrap() <= v + 1e-12);
        }
        prop_assert_eq!(*levels.last().unwrap(), Level::Finite(*f.support().last().unwrap()));
    }

    #[test]
    fn myerson_matches_exhaustive_optimum(f in product_strategy(1..=2, 1.0, 3)) {
        let a = SingleItemAuction::optimal(&f);
        let r = exact_revenue_single_item(&a, &f).unwrap();
        let opt = brute_force_opt(&f).unwrap();
        prop_assert!((r - opt.revenue).abs() < 1e-9, "myerson {} vs opt {}", r, opt.revenue);
    }

    #[test]
    fn payment_is_the_smallest_winning_bid(f in product_strategy(1..=3, 1.0, 4)) {
        let a = SingleItemAuction::optimal(&f);
        let bps: Vec<f64> = a.phis().iter().flat_map(|p| p.breakpoints().to_vec()).collect();
        let probes = probe_bids(1.0, &bps);
        for (v, _) in profiles(&f) {
            let o = a.run(&v);
            if let Some(w) = o.winner() {
                let mut b = v.clone();
                let first = probes.iter().copied().find(|&x| {
                    b[w] = x;
                    a.winner(&b) == Some(w)
                });
                prop_assert_eq!(Some(o.pay[w]), first);
                prop_assert!(o.pay[w] <= v[w]);
            } else {
                prop_assert_eq!(o.revenue(), 0.0);
            }
        }
    }

    #[test]
    fn truthful_on_probe_grid(f in product_strategy(1..=3, 1.0, 3)) {
        let a = SingleItemAuction::optimal(&f);
        let probes = probe_bids(1.0, &[]);
        for (v, _) in profiles(&f) {
            let o = a.run(&v);
            for i in 0..v.len() {
                let u = o.alloc[i] * v[i] - o.pay[i];
                let mut b = v.clone();
                for &d in &probes {
                    b[i] = d;
                    let od = a.run(&b);
                    prop_assert!(od.alloc[i] * v[i] - od.pay[i] <= u + 1e-12);
                }
            }
        }
    }
}

#[test]
fn three_point_ironing_is_optimal() {
    // a dent in the revenue curve: ironing must kick in to be optimal
    let f = coarse_auction::dist::DiscreteDistribution::new(vec![0.25, 0.5, 1.0], vec![0.45, 0.1, 0.45], 1.0).unwrap();
    let prod = ProductDistribution::iid(f, 2).unwrap();
    let a = SingleItemAuction::optimal(&prod);
    let r = exact_revenue_single_item(&a, &prod).unwrap();
    assert!((r - brute_force_opt(&prod).unwrap().revenue).abs() < 1e-12);
}
