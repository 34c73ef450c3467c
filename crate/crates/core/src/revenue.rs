//! Expected revenue: exact for Myersonian auctions on product distributions,
//! brute force for any mechanism, Monte Carlo for continuous sources, and a
//! brute-force optimum over all monotone deterministic rules for tiny cases.

use serde::{Deserialize, Serialize};

use crate::dist::{derive_seed, seeded_rng, ProductDistribution, SampleSource};
use crate::error::{Error, Result};
use crate::myerson::{precedes, Level, Mechanism, PaymentRule, SingleItemAuction};
use crate::par::{map_chunks, Execution};

/// Default ceiling on enumerated support profiles.
pub const PROFILE_LIMIT: u128 = 1_000_000;

const MC_CHUNK: usize = 4096;

/// Exact expected revenue of a Myersonian auction under a product
/// distribution, in `O(n² t²)`.
///
/// For each potential winner `i` and each runner-up `(j, v_j)` it adds the
/// price `w_i(v_j)` times the probability that `v_j` beats every other bidder
/// while `i` beats `v_j`. A reserve bidder at level 0 that loses all ties
/// stands in for "no sale", so a runner-up always exists.
pub fn exact_revenue_single_item(a: &SingleItemAuction, f: &ProductDistribution) -> Result<f64> {
    let n = a.n();
    if f.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.n(),
        });
    }
    if a.payment_rule() != PaymentRule::Threshold {
        return Err(Error::param("exact revenue assumes threshold payments"));
    }
    let levels: Vec<Vec<(Level, f64)>> = (0..n)
        .map(|i| {
            f.factor(i)
                .iter()
                .map(|(v, p)| (a.phi(i).eval(v), p))
                .collect()
        })
        .collect();
    let reserve = vec![(Level::Finite(0.0), 1.0)];
    // P(bidder k falls behind (l, j))
    let behind = |k: usize, l: Level, j: usize| -> f64 {
        if k == n {
            return if precedes(l, j, Level::Finite(0.0), n) { 1.0 } else { 0.0 };
        }
        levels[k]
            .iter()
            .filter(|&&(lk, _)| precedes(l, j, lk, k))
            .map(|&(_, p)| p)
            .sum()
    };

    let mut r = 0.0;
    for i in 0..n {
        for j in (0..=n).filter(|&j| j != i) {
            let runner = if j == n { &reserve } else { &levels[j] };
            for &(lj, pj) in runner {
                let beat: f64 = levels[i]
                    .iter()
                    .filter(|&&(li, _)| precedes(li, i, lj, j))
                    .map(|&(_, p)| p)
                    .sum();
                if beat == 0.0 {
                    continue;
                }
                let mut others = 1.0;
                for k in (0..=n).filter(|&k| k != i && k != j) {
                    others *= behind(k, lj, j);
                    if others == 0.0 {
                        break;
                    }
                }
                if others == 0.0 {
                    continue;
                }
                let w = a
                    .phi(i)
                    .first_breakpoint_where(|l| precedes(l, i, lj, j))
                    .expect("a beating support value implies a beating breakpoint");
                r += w * beat * pj * others;
            }
        }
    }
    Ok(r)
}

/// `E_{v∼F}[g(v)]` by enumerating the joint support.
pub fn expectation<G>(f: &ProductDistribution, exec: Execution, g: G) -> Result<f64>
where
    G: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    let count = f.profile_count();
    if count > PROFILE_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: count,
            limit: PROFILE_LIMIT,
        });
    }
    let parts = map_chunks(exec, count as usize, 8192, |_, range| -> Result<f64> {
        let mut v = vec![0.0; f.n()];
        let mut acc = 0.0;
        for idx in range {
            let p = f.profile(idx, &mut v);
            acc += p * g(&v)?;
        }
        Ok(acc)
    });
    parts.into_iter().sum()
}

/// Expected revenue by enumerating every support profile.
pub fn brute_force_revenue<M: Mechanism + ?Sized>(
    m: &M,
    f: &ProductDistribution,
    exec: Execution,
) -> Result<f64> {
    if f.n() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: f.n(),
        });
    }
    expectation(f, exec, |v| Ok(m.run(v)?.revenue()))
}

/// A Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `E[g(v)]` with `v_i` drawn independently from
/// `sources[i]`. Deterministic for a seed regardless of execution mode.
pub fn monte_carlo<G>(
    sources: &[SampleSource],
    trials: usize,
    seed: u64,
    exec: Execution,
    g: G,
) -> Result<Estimate>
where
    G: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if trials == 0 {
        return Err(Error::param("Monte Carlo needs at least one trial"));
    }
    let parts = map_chunks(exec, trials, MC_CHUNK, |c, range| -> Result<(f64, f64)> {
        let mut rng = seeded_rng(derive_seed(seed, c as u64));
        let mut v = vec![0.0; sources.len()];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in range {
            for (x, src) in v.iter_mut().zip(sources) {
                *x = src.sample(&mut rng);
            }
            let y = g(&v)?;
            s += y;
            s2 += y * y;
        }
        Ok((s, s2))
    });
    let (mut s, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let t = trials as f64;
    let mean = s / t;
    let var = if trials > 1 {
        ((s2 - t * mean * mean) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std_error: (var / t).sqrt(),
        trials,
    })
}

pub fn monte_carlo_revenue<M: Mechanism + ?Sized>(
    m: &M,
    sources: &[SampleSource],
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Estimate> {
    if sources.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: sources.len(),
        });
    }
    monte_carlo(sources, trials, seed, exec, |v| Ok(m.run(v)?.revenue()))
}

/// The revenue-optimal monotone deterministic rule, found by exhaustive
/// search. Thresholds are support indices; `thresholds[i][y]` is the lowest
/// winning value index of bidder `i` when the other bidder has value index
/// `y` (`None`: never wins).
#[derive(Clone, Debug, PartialEq)]
pub struct OptRule {
    pub revenue: f64,
    pub thresholds: Vec<Vec<Option<usize>>>,
}

/// Exhaustive optimum for `n ≤ 2` bidders with at most 4 support points each.
pub fn brute_force_opt(f: &ProductDistribution) -> Result<OptRule> {
    let n = f.n();
    if n > 2 || f.factors().iter().any(|d| d.len() > 4) {
        return Err(Error::InstanceTooLarge {
            size: f.profile_count(),
            limit: 16,
        });
    }
    // revenue from a bidder who wins exactly from support index a upward
    let sell = |i: usize, a: usize| -> f64 {
        let d = f.factor(i);
        if a >= d.len() {
            0.0
        } else {
            d.support()[a] * d.probs()[a..].iter().sum::<f64>()
        }
    };
    let none_if_top = |a: usize, t: usize| (a < t).then_some(a);

    if n == 1 {
        let t = f.factor(0).len();
        let (a, r) = (0..=t)
            .map(|a| (a, sell(0, a)))
            .fold((t, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        return Ok(OptRule {
            revenue: r,
            thresholds: vec![vec![none_if_top(a, t)]],
        });
    }

    let (t1, t2) = (f.factor(0).len(), f.factor(1).len());
    let (p1, p2) = (f.factor(0).probs(), f.factor(1).probs());
    let mut best = OptRule {
        revenue: -1.0,
        thresholds: Vec::new(),
    };
    let mut a = vec![0usize; t2];
    loop {
        let mut rev: f64 = (0..t2).map(|y| p2[y] * sell(0, a[y])).sum();
        let mut b = vec![t2; t1];
        for x in 0..t1 {
            // bidder 2 may win from index bb only where bidder 1 loses
            for bb in 0..t2 {
                if (bb..t2).all(|y| x < a[y]) && sell(1, bb) > sell(1, b[x]) {
                    b[x] = bb;
                }
            }
            rev += p1[x] * sell(1, b[x]);
        }
        if rev > best.revenue {
            best = OptRule {
                revenue: rev,
                thresholds: vec![
                    a.iter().map(|&v| none_if_top(v, t1)).collect(),
                    b.iter().map(|&v| none_if_top(v, t2)).collect(),
                ],
            };
        }
        // next threshold vector in mixed radix t1 + 1
        let mut k = 0;
        while k < t2 {
            a[k] += 1;
            if a[k] <= t1 {
                break;
            }
            a[k] = 0;
            k += 1;
        }
        if k == t2 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;

    fn uniform(vals: &[f64], h: f64) -> DiscreteDistribution {
        DiscreteDistribution::uniform_over(vals, h).unwrap()
    }

    #[test]
    fn two_bidder_uniform_example() {
        let f = ProductDistribution::iid(uniform(&[1.0, 2.0], 2.0), 2).unwrap();
        let a = SingleItemAuction::optimal(&f);
        let r = exact_revenue_single_item(&a, &f).unwrap();
        assert!((r - 1.5).abs() < 1e-12);
        let b = brute_force_revenue(&a, &f, Execution::Sequential).unwrap();
        assert!((r - b).abs() < 1e-12);
        let opt = brute_force_opt(&f).unwrap();
        assert!((opt.revenue - 1.5).abs() < 1e-12);
    }

    #[test]
    fn point_mass_sells_at_value() {
        let f = ProductDistribution::new(vec![DiscreteDistribution::point_mass(0.7, 1.0).unwrap()])
            .unwrap();
        let a = SingleItemAuction::optimal(&f);
        assert!((exact_revenue_single_item(&a, &f).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn too_large_is_rejected() {
        let vals: Vec<f64> = (0..1001).map(|k| k as f64 / 1001.0).collect();
        let f = ProductDistribution::iid(uniform(&vals, 1.0), 2).unwrap();
        let a = SingleItemAuction::optimal(&f);
        assert!(matches!(
            brute_force_revenue(&a, &f, Execution::default()),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_mode_independent() {
        let f = ProductDistribution::iid(uniform(&[1.0, 2.0], 2.0), 2).unwrap();
        let a = SingleItemAuction::optimal(&f);
        let src = SampleSource::Discrete {
            support: vec![1.0, 2.0],
            probs: vec![0.5, 0.5],
        };
        let sources = vec![src.clone(), src];
        let s = monte_carlo_revenue(&a, &sources, 20_000, 9, Execution::Sequential).unwrap();
        let p = monte_carlo_revenue(&a, &sources, 20_000, 9, Execution::Parallel).unwrap();
        assert_eq!(s, p);
        assert!((s.mean - 1.5).abs() < 4.0 * s.std_error);
    }
}
