use coarse_auction::dist::{seeded_rng, EmpiricalSamples, EpsGrid, ProductDistribution, SampleSource};
use coarse_auction::envs::{Environment, Maximizer, SpAuction};
use coarse_auction::myerson::ironed_virtual_valuation;
use coarse_auction::par::Execution;
use coarse_auction::revenue::{brute_force_revenue, monte_carlo_revenue};
use coarse_auction::sprounding::randomized_round_sp_seeded;
use coarse_auction::SingleItemAuction;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sources(n: usize) -> Vec<SampleSource> {
    let mut rng = seeded_rng(1);
    (0..n)
        .map(|_| {
            let support: Vec<f64> = (0..12).map(|k| k as f64 / 12.0 + rng.gen::<f64>() / 24.0).collect();
            SampleSource::Discrete { probs: vec![1.0 / 12.0; 12], support }
        })
        .collect()
}

fn product(src: &[SampleSource]) -> ProductDistribution {
    ProductDistribution::new(src.iter().map(|s| s.as_discrete(1.0).unwrap().unwrap()).collect()).unwrap()
}

fn revenue(c: &mut Criterion) {
    let src = sources(4);
    let f = product(&src);
    let a = SingleItemAuction::optimal(&f);
    let mut g = c.benchmark_group("revenue");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("brute_force", name), &exec, |b, &e| {
            b.iter(|| brute_force_revenue(&a, &f, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("monte_carlo_1e5", name), &exec, |b, &e| {
            b.iter(|| monte_carlo_revenue(&a, &src, 100_000, 3, e).unwrap())
        });
    }
    g.finish();
}

fn sp_rounding(c: &mut Criterion) {
    let src = sources(3);
    let s = EmpiricalSamples::draw(&src, 200, 1.0, 5).unwrap();
    let phis = s.product().unwrap().factors().iter().map(ironed_virtual_valuation).collect();
    let a = SpAuction::new(phis, Environment::UniformMatroid { n: 3, k: 2 }, Maximizer::Exact).unwrap();
    let grid = EpsGrid::new(0.25, 1.0).unwrap();
    let mut g = c.benchmark_group("randomized_round_sp");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| randomized_round_sp_seeded(&a, &s, &grid, 0.2, 9, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, revenue, sp_rounding);
criterion_main!(benches);
