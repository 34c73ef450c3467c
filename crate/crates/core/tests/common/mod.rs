#![allow(dead_code)]

use coarse_auction::dist::{DiscreteDistribution, ProductDistribution};
use proptest::prelude::*;
use rand::Rng;

/// Values on a 1/16 lattice keep sums exact and make ties and grid hits common.
pub fn lattice_value(m: u32, h: f64) -> f64 {
    h * m as f64 / 16.0
}

pub fn random_dist<R: Rng + ?Sized>(rng: &mut R, h: f64, max_support: usize) -> DiscreteDistribution {
    let k = rng.gen_range(1..=max_support);
    let vals: Vec<f64> = (0..k).map(|_| lattice_value(rng.gen_range(0..=16), h)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=10) as f64).collect();
    let s: f64 = w.iter().sum();
    DiscreteDistribution::new(vals, w.iter().map(|x| x / s).collect(), h).unwrap()
}

/// Continuous-ish support values (not on any lattice).
pub fn random_dist_real<R: Rng + ?Sized>(rng: &mut R, h: f64, max_support: usize) -> DiscreteDistribution {
    let k = rng.gen_range(1..=max_support);
    let vals: Vec<f64> = (0..k).map(|_| h * rng.gen::<f64>()).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    DiscreteDistribution::new(vals, w.iter().map(|x| x / s).collect(), h).unwrap()
}

pub fn random_product<R: Rng + ?Sized>(rng: &mut R, n: usize, h: f64, max_support: usize) -> ProductDistribution {
    ProductDistribution::new((0..n).map(|_| random_dist(rng, h, max_support)).collect()).unwrap()
}

pub fn dist_strategy(h: f64, max_support: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((0u32..=16, 1u32..=10), 1..=max_support).prop_map(move |pts| {
        let s: u32 = pts.iter().map(|p| p.1).sum();
        let (v, p): (Vec<f64>, Vec<f64>) = pts
            .iter()
            .map(|&(m, w)| (lattice_value(m, h), w as f64 / s as f64))
            .unzip();
        DiscreteDistribution::new(v, p, h).unwrap()
    })
}

pub fn product_strategy(n: std::ops::RangeInclusive<usize>, h: f64, max_support: usize) -> impl Strategy<Value = ProductDistribution> {
    prop::collection::vec(dist_strategy(h, max_support), n)
        .prop_map(|f| ProductDistribution::new(f).unwrap())
}

/// Every support profile with its probability.
pub fn profiles(f: &ProductDistribution) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    let mut v = vec![0.0; f.n()];
    for idx in 0..f.profile_count() as usize {
        let p = f.profile(idx, &mut v);
        out.push((v.clone(), p));
    }
    out
}

/// Candidate bids: the support points, the grid points, and a fine lattice.
pub fn probe_bids(h: f64, extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=64).map(|k| h * k as f64 / 64.0).collect();
    b.extend_from_slice(extra);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}
