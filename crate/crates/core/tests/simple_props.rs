mod common;

use coarse_auction::dist::EpsGrid;
use coarse_auction::myerson::SingleItemAuction;
use coarse_auction::par::Execution;
use coarse_auction::rounding::greedy_round;
use coarse_auction::simple::{class_size_log_bound, enumerate_canonical, SimpleAuctionSequence};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn encoding_preserves_outcomes(f in product_strategy(1..=3, 1.0, 4), k in 1usize..=4, extra in prop::collection::vec(0.0f64..=1.0, 3)) {
        let grid = EpsGrid::new(0.1 * k as f64, 1.0).unwrap();
        let a = greedy_round(&SingleItemAuction::optimal(&f), &f, &grid, Execution::Sequential).unwrap();
        let s = SimpleAuctionSequence::encode(&a, &grid).unwrap();
        prop_assert!(s.is_canonical());
        let decoded = s.to_single_item().unwrap();
        let text = SimpleAuctionSequence::from_text(&s.to_text()).unwrap();
        prop_assert_eq!(&text, &s);

        let mut vals: Vec<f64> = (0..grid.intervals()).map(|j| grid.point(j)).collect();
        vals.extend(&extra);
        vals.push(1.0);
        let n = f.n();
        let mut idx = vec![0usize; n];
        loop {
            let v: Vec<f64> = idx.iter().map(|&k| vals[k]).collect();
            let (oa, os, od) = (a.run(&v), s.run(&v), decoded.run(&v));
            prop_assert_eq!(&oa, &os, "profile {:?}", v);
            prop_assert_eq!(&os, &od);
            let mut p = 0;
            while p < n && idx[p] + 1 == vals.len() {
                idx[p] = 0;
                p += 1;
            }
            if p == n {
                break;
            }
            idx[p] += 1;
        }
    }
}

#[test]
fn canonical_class_fits_its_bound() {
    for (n, eps) in [(1, 0.5), (1, 0.25), (2, 0.5)] {
        let grid = EpsGrid::new(eps, 1.0).unwrap();
        let all = enumerate_canonical(n, &grid).unwrap();
        assert!(all.iter().all(|s| s.is_canonical()));
        assert!((all.len() as f64).ln() <= class_size_log_bound(n, &grid) + 1e-9);
        for s in &all {
            let d = s.to_single_item().unwrap();
            let back = SimpleAuctionSequence::encode(&d, &grid).unwrap();
            assert_eq!(back.run(&vec![0.5; n]), s.run(&vec![0.5; n]));
        }
    }
}
