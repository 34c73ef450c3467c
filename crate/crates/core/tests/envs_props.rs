mod common;

use coarse_auction::dist::ProductDistribution;
use coarse_auction::envs::*;
use coarse_auction::myerson::{ironed_virtual_valuation, Level};
use coarse_auction::par::Execution;
use coarse_auction::verify::{verify, VerifyConfig};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_env<R: Rng>(rng: &mut R, n: usize) -> Environment {
    match rng.gen_range(0..6) {
        0 => Environment::SingleItem { n },
        1 => Environment::UniformMatroid { n, k: rng.gen_range(1..=n) },
        2 => {
            let nb = rng.gen_range(1..=n);
            let mut blocks = vec![Vec::new(); nb];
            for i in 0..n {
                blocks[if i < nb { i } else { rng.gen_range(0..nb) }].push(i + 1);
            }
            let capacities = blocks.iter().map(|b| rng.gen_range(1..=b.len())).collect();
            Environment::PartitionMatroid { blocks, capacities }
        }
        3 => Environment::PublicProject { n },
        4 => {
            let mut m: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=8) as f64 / 8.0).collect();
            m.sort_by(|a, b| b.total_cmp(a));
            Environment::Position { multipliers: m }
        }
        _ => Environment::Knapsack {
            weights: (0..n).map(|_| rng.gen_range(1..=10)).collect(),
            capacity: rng.gen_range(1..=20),
        },
    }
}

fn random_levels<R: Rng>(rng: &mut R, n: usize) -> Vec<Level> {
    (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => Level::BelowAll,
            _ => Level::Finite(rng.gen_range(-16..=16) as f64 / 8.0),
        })
        .collect()
}

#[test]
fn max_ivw_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let env = random_env(&mut rng, n);
        env.validate().unwrap();
        let levels = random_levels(&mut rng, n);
        let x = env.max_ivw(&levels);
        let best = env
            .enumerate_outcomes()
            .unwrap()
            .iter()
            .map(|y| welfare(y, &levels))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(env.enumerate_outcomes().unwrap().contains(&x), "{env:?} {x:?}");
        assert_eq!(welfare(&x, &levels), best, "{env:?} {levels:?}");
    }
}

#[test]
fn knapsack_greedy_is_half_approximate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let weights: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=30)).collect();
        let capacity = rng.gen_range(1..=60);
        let levels = random_levels(&mut rng, n);
        let dp = welfare(&knapsack_exact(&weights, capacity, &levels), &levels);
        let g = knapsack_approx(&weights, capacity, &levels);
        let used: u32 = g.iter().zip(&weights).filter(|(x, _)| **x > 0.0).map(|(_, w)| w).sum();
        assert!(used <= capacity);
        assert!(welfare(&g, &levels) >= dp / 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sp_auctions_are_truthful(f in product_strategy(1..=3, 1.0, 3), seed in any::<u64>(), approx in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = f.n();
        let (env, m) = if approx {
            (Environment::Knapsack {
                weights: (0..n).map(|_| rng.gen_range(1..=5)).collect(),
                capacity: rng.gen_range(1..=8),
            }, Maximizer::Approx)
        } else {
            (random_env(&mut rng, n), Maximizer::Exact)
        };
        let phis = f.factors().iter().map(ironed_virtual_valuation).collect();
        let a = SpAuction::new(phis, env, m).unwrap();
        let cfg = VerifyConfig { deviation_step: Some(1.0 / 64.0), ..Default::default() };
        let rep = verify(&a, &f, &cfg, Execution::Sequential).unwrap();
        prop_assert!(rep.is_clean(), "{:?}", rep.violations.first());
    }
}

#[test]
fn single_item_environment_agrees_with_single_item_auction() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let f: ProductDistribution = random_product(&mut rng, n, 1.0, 4);
        let si = coarse_auction::SingleItemAuction::optimal(&f);
        let sp = SpAuction::new(si.phis().to_vec(), Environment::SingleItem { n }, Maximizer::Exact).unwrap();
        for (v, _) in profiles(&f) {
            assert_eq!(sp.run_sp(&v).unwrap(), si.run(&v));
        }
    }
}
