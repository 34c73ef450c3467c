//! Single-parameter environments, their virtual-welfare maximizers, and
//! Myersonian auctions over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::myerson::{check_bids, Level, Mechanism, Outcome, SteppedVirtualValuation};

pub const MAX_WEIGHT: u32 = 10_000;

/// A feasible-outcome family `X ⊆ [0,1]^n`.
///
/// Partition blocks list 1-based bidder indices and must cover `1..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Environment {
    SingleItem { n: usize },
    UniformMatroid { n: usize, k: usize },
    PartitionMatroid { blocks: Vec<Vec<usize>>, capacities: Vec<usize> },
    PublicProject { n: usize },
    /// Slot multipliers `x(1) ≥ … ≥ x(n)`, one slot per bidder.
    Position { multipliers: Vec<f64> },
    Knapsack { weights: Vec<u32>, capacity: u32 },
}

/// Exact welfare maximization, or the greedy 2-approximation (knapsack only).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maximizer {
    #[default]
    Exact,
    Approx,
}

impl Environment {
    pub fn n(&self) -> usize {
        match self {
            Environment::SingleItem { n }
            | Environment::UniformMatroid { n, .. }
            | Environment::PublicProject { n } => *n,
            Environment::PartitionMatroid { blocks, .. } => blocks.iter().map(Vec::len).sum(),
            Environment::Position { multipliers } => multipliers.len(),
            Environment::Knapsack { weights, .. } => weights.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::param("environment needs at least one bidder"));
        }
        match self {
            Environment::PartitionMatroid { blocks, capacities } => {
                if blocks.len() != capacities.len() {
                    return Err(Error::DimensionMismatch {
                        expected: blocks.len(),
                        got: capacities.len(),
                    });
                }
                let n = self.n();
                let mut seen = vec![false; n];
                for &b in blocks.iter().flatten() {
                    if b == 0 || b > n || seen[b - 1] {
                        return Err(Error::param("partition blocks must cover bidders 1..=n once"));
                    }
                    seen[b - 1] = true;
                }
            }
            Environment::Position { multipliers } => {
                if multipliers.iter().any(|&x| !x.is_finite() || !(0.0..=1.0).contains(&x))
                    || multipliers.windows(2).any(|w| w[0] < w[1])
                {
                    return Err(Error::param(
                        "position multipliers must be nonincreasing and in [0, 1]",
                    ));
                }
            }
            Environment::Knapsack { weights, capacity } => {
                if weights.iter().any(|&w| w == 0 || w > MAX_WEIGHT) {
                    return Err(Error::param(format!(
                        "knapsack weights must be integers in 1..={MAX_WEIGHT}"
                    )));
                }
                if *capacity > MAX_WEIGHT.saturating_mul(weights.len() as u32) {
                    return Err(Error::param("knapsack capacity too large"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `W_X = max_{x ∈ X} Σ_i x_i`.
    pub fn w_max(&self) -> f64 {
        match self {
            Environment::SingleItem { .. } => 1.0,
            Environment::UniformMatroid { n, k } => (*k).min(*n) as f64,
            Environment::PartitionMatroid { blocks, capacities } => blocks
                .iter()
                .zip(capacities)
                .map(|(b, &c)| b.len().min(c) as f64)
                .sum(),
            Environment::PublicProject { n } => *n as f64,
            Environment::Position { multipliers } => multipliers.iter().sum(),
            Environment::Knapsack { weights, capacity } => {
                let mut w = weights.clone();
                w.sort_unstable();
                let mut used = 0u64;
                let mut count = 0;
                for x in w {
                    used += x as u64;
                    if used > *capacity as u64 {
                        break;
                    }
                    count += 1;
                }
                count as f64
            }
        }
    }

    /// A welfare-maximizing outcome for the given virtual values; among
    /// maximizers, the lexicographically greatest allocation vector.
    pub fn max_ivw(&self, levels: &[Level]) -> Vec<f64> {
        let n = levels.len();
        // candidates by level desc, index asc
        let order = || {
            let mut idx: Vec<usize> = (0..n).filter(|&i| levels[i].is_nonnegative()).collect();
            idx.sort_by(|&a, &b| levels[b].cmp(&levels[a]).then(a.cmp(&b)));
            idx
        };
        let mut x = vec![0.0; n];
        match self {
            Environment::SingleItem { .. } => {
                if let Some(&i) = order().first() {
                    x[i] = 1.0;
                }
            }
            Environment::UniformMatroid { k, .. } => {
                for i in order().into_iter().take(*k) {
                    x[i] = 1.0;
                }
            }
            Environment::PartitionMatroid { blocks, capacities } => {
                let mut block_of = vec![0; n];
                for (b, members) in blocks.iter().enumerate() {
                    for &m in members {
                        block_of[m - 1] = b;
                    }
                }
                let mut used = vec![0; blocks.len()];
                for i in order() {
                    let b = block_of[i];
                    if used[b] < capacities[b] {
                        used[b] += 1;
                        x[i] = 1.0;
                    }
                }
            }
            Environment::PublicProject { .. } => {
                let total: f64 = levels.iter().map(|l| l.to_f64()).sum();
                if total >= 0.0 {
                    x.iter_mut().for_each(|v| *v = 1.0);
                }
            }
            Environment::Position { multipliers } => {
                for (slot, i) in order().into_iter().enumerate() {
                    x[i] = multipliers[slot];
                }
            }
            Environment::Knapsack { weights, capacity } => {
                x = knapsack_exact(weights, *capacity, levels);
            }
        }
        x
    }

    pub fn maximize(&self, levels: &[Level], m: Maximizer) -> Result<Vec<f64>> {
        match (m, self) {
            (Maximizer::Exact, _) => Ok(self.max_ivw(levels)),
            (Maximizer::Approx, Environment::Knapsack { weights, capacity }) => {
                Ok(knapsack_approx(weights, *capacity, levels))
            }
            (Maximizer::Approx, _) => Err(Error::param(
                "the approximate maximizer is only defined for knapsack",
            )),
        }
    }

    /// Every feasible outcome, for exhaustive cross-checks on small `n`.
    pub fn enumerate_outcomes(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        if n > 8 {
            return Err(Error::InstanceTooLarge {
                size: n as u128,
                limit: 8,
            });
        }
        let subsets = || (0u32..1 << n).map(move |s| (0..n).map(move |i| s >> i & 1 == 1));
        let as_x = |bits: Vec<bool>| bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
        let out = match self {
            Environment::SingleItem { .. } => (0..=n)
                .map(|w| (0..n).map(|i| if i == w { 1.0 } else { 0.0 }).collect())
                .collect(),
            Environment::UniformMatroid { k, .. } => subsets()
                .map(|s| s.collect::<Vec<_>>())
                .filter(|s| s.iter().filter(|&&b| b).count() <= *k)
                .map(as_x)
                .collect(),
            Environment::PartitionMatroid { blocks, capacities } => subsets()
                .map(|s| s.collect::<Vec<_>>())
                .filter(|s| {
                    blocks
                        .iter()
                        .zip(capacities)
                        .all(|(b, &c)| b.iter().filter(|&&m| s[m - 1]).count() <= c)
                })
                .map(as_x)
                .collect(),
            Environment::PublicProject { .. } => vec![vec![0.0; n], vec![1.0; n]],
            Environment::Position { multipliers } => {
                let mut out = Vec::new();
                let mut slot_of = vec![None; n];
                assign_slots(0, n, &mut vec![false; n], &mut slot_of, &mut |s| {
                    out.push(
                        s.iter()
                            .map(|o| o.map_or(0.0, |k: usize| multipliers[k]))
                            .collect(),
                    )
                });
                out
            }
            Environment::Knapsack { weights, capacity } => subsets()
                .map(|s| s.collect::<Vec<_>>())
                .filter(|s| {
                    s.iter()
                        .zip(weights)
                        .filter(|(&b, _)| b)
                        .map(|(_, &w)| w as u64)
                        .sum::<u64>()
                        <= *capacity as u64
                })
                .map(as_x)
                .collect(),
        };
        Ok(out)
    }
}

fn assign_slots(
    i: usize,
    n: usize,
    used: &mut Vec<bool>,
    slot_of: &mut Vec<Option<usize>>,
    emit: &mut dyn FnMut(&[Option<usize>]),
) {
    if i == n {
        emit(slot_of);
        return;
    }
    slot_of[i] = None;
    assign_slots(i + 1, n, used, slot_of, emit);
    for k in 0..n {
        if !used[k] {
            used[k] = true;
            slot_of[i] = Some(k);
            assign_slots(i + 1, n, used, slot_of, emit);
            used[k] = false;
        }
    }
    slot_of[i] = None;
}

/// `Σ_i x_i φ_i`, summed in index order; unallocated bidders contribute 0.
pub fn welfare(x: &[f64], levels: &[Level]) -> f64 {
    x.iter()
        .zip(levels)
        .filter(|(&xi, _)| xi != 0.0)
        .map(|(&xi, l)| xi * l.to_f64())
        .sum()
}

/// Dynamic program over integer capacities with a lexicographic tie-break:
/// each item, in index order, is taken whenever an optimum still allows it.
pub fn knapsack_exact(weights: &[u32], capacity: u32, levels: &[Level]) -> Vec<f64> {
    let n = weights.len();
    let cap = capacity as usize;
    let value = |i: usize| levels[i].finite().filter(|&v| v >= 0.0);
    // best[i][c]: optimum over items i.. with capacity c
    let mut best = vec![vec![0.0f64; cap + 1]; n + 1];
    for i in (0..n).rev() {
        let w = weights[i] as usize;
        for c in 0..=cap {
            let skip = best[i + 1][c];
            best[i][c] = match value(i) {
                Some(v) if w <= c => skip.max(v + best[i + 1][c - w]),
                _ => skip,
            };
        }
    }
    let mut x = vec![0.0; n];
    let mut c = cap;
    for i in 0..n {
        let w = weights[i] as usize;
        if let Some(v) = value(i) {
            if w <= c && v + best[i + 1][c - w] >= best[i + 1][c] {
                x[i] = 1.0;
                c -= w;
            }
        }
    }
    x
}

/// Greedy by density up to the first item that does not fit, or the single
/// best fitting item, whichever has more welfare. Monotone in each bid.
pub fn knapsack_approx(weights: &[u32], capacity: u32, levels: &[Level]) -> Vec<f64> {
    let n = weights.len();
    let pos: Vec<usize> = (0..n)
        .filter(|&i| matches!(levels[i], Level::Finite(v) if v > 0.0))
        .collect();
    let val = |i: usize| levels[i].to_f64();
    let mut by_density = pos.clone();
    by_density.sort_by(|&a, &b| {
        let (da, db) = (val(a) / weights[a] as f64, val(b) / weights[b] as f64);
        db.partial_cmp(&da).unwrap().then(a.cmp(&b))
    });
    let mut prefix = vec![0.0; n];
    let mut used = 0u64;
    let mut prefix_welfare = 0.0;
    for i in by_density {
        used += weights[i] as u64;
        if used > capacity as u64 {
            break;
        }
        prefix[i] = 1.0;
        prefix_welfare += val(i);
    }
    let single = pos
        .iter()
        .copied()
        .filter(|&i| weights[i] <= capacity)
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if val(b) >= val(i) => Some(b),
            _ => Some(i),
        });
    match single {
        Some(s) if val(s) > prefix_welfare => {
            let mut x = vec![0.0; n];
            x[s] = 1.0;
            x
        }
        _ => prefix,
    }
}

/// A Myersonian auction over a single-parameter environment: the outcome
/// maximizes virtual welfare and payments follow from the allocation curve.
#[derive(Clone, Debug, PartialEq)]
pub struct SpAuction {
    phis: Vec<SteppedVirtualValuation>,
    env: Environment,
    maximizer: Maximizer,
    h: f64,
}

impl SpAuction {
    pub fn new(
        phis: Vec<SteppedVirtualValuation>,
        env: Environment,
        maximizer: Maximizer,
    ) -> Result<Self> {
        env.validate()?;
        if phis.len() != env.n() {
            return Err(Error::DimensionMismatch {
                expected: env.n(),
                got: phis.len(),
            });
        }
        if maximizer == Maximizer::Approx && !matches!(env, Environment::Knapsack { .. }) {
            return Err(Error::param("the approximate maximizer is only defined for knapsack"));
        }
        let h = phis[0].h();
        if phis.iter().any(|p| p.h() != h) {
            return Err(Error::param("all virtual valuations must share H"));
        }
        Ok(SpAuction {
            phis,
            env,
            maximizer,
            h,
        })
    }

    pub fn phis(&self) -> &[SteppedVirtualValuation] {
        &self.phis
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn maximizer(&self) -> Maximizer {
        self.maximizer
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn with_phis(&self, phis: Vec<SteppedVirtualValuation>) -> Result<Self> {
        SpAuction::new(phis, self.env.clone(), self.maximizer)
    }

    fn allocate(&self, levels: &[Level]) -> Vec<f64> {
        self.env
            .maximize(levels, self.maximizer)
            .expect("maximizer validated at construction")
    }

    /// Allocation from the maximizer; bidder `i` pays
    /// `Σ (x_i(t) − x_i(t⁻))·t` over the jumps of her allocation curve up
    /// to her bid.
    pub fn run_sp(&self, bids: &[f64]) -> Result<Outcome> {
        let mut levels: Vec<Level> = self
            .phis
            .iter()
            .zip(bids)
            .map(|(p, &b)| p.eval(b))
            .collect();
        let alloc = self.allocate(&levels);
        let mut pay = vec![0.0; bids.len()];
        for i in 0..bids.len() {
            if alloc[i] == 0.0 {
                continue;
            }
            let own = levels[i];
            levels[i] = Level::BelowAll;
            let mut prev = self.allocate(&levels)[i];
            let phi = &self.phis[i];
            for (&t, &l) in phi.breakpoints().iter().zip(phi.levels()) {
                if t > bids[i] {
                    break;
                }
                levels[i] = l;
                let x = self.allocate(&levels)[i];
                if x < prev - 1e-12 {
                    return Err(Error::MonotonicityViolated { bidder: i });
                }
                pay[i] += (x - prev) * t;
                prev = x;
            }
            levels[i] = own;
        }
        Ok(Outcome { alloc, pay })
    }
}

impl Mechanism for SpAuction {
    fn n(&self) -> usize {
        self.phis.len()
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        check_bids(bids, self.phis.len(), self.h)?;
        self.run_sp(bids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;
    use crate::myerson::{ironed_virtual_valuation, SingleItemAuction};

    fn f(vals: &[f64]) -> Vec<Level> {
        vals.iter().map(|&v| Level::Finite(v)).collect()
    }

    #[test]
    fn uniform_matroid_example() {
        let env = Environment::UniformMatroid { n: 4, k: 2 };
        assert_eq!(env.max_ivw(&f(&[3.0, -1.0, 2.0, 2.0])), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn knapsack_examples() {
        let (w, c) = (vec![2, 3, 4], 5);
        let l = f(&[3.0, 3.0, 5.0]);
        assert_eq!(knapsack_exact(&w, c, &l), vec![1.0, 1.0, 0.0]);
        assert_eq!(knapsack_approx(&w, c, &l), vec![0.0, 0.0, 1.0]);
        let env = Environment::Knapsack { weights: w, capacity: c };
        assert_eq!(env.w_max(), 2.0);
    }

    #[test]
    fn position_excludes_negative() {
        let env = Environment::Position {
            multipliers: vec![1.0, 0.5, 0.25],
        };
        assert_eq!(env.max_ivw(&f(&[1.0, -1.0, 2.0])), vec![0.5, 0.0, 1.0]);
        assert_eq!(env.w_max(), 1.75);
    }

    #[test]
    fn public_project_payments() {
        let h = 3.0;
        let phis = vec![
            ironed_virtual_valuation(&DiscreteDistribution::uniform_over(&[1.0, 3.0], h).unwrap()),
            ironed_virtual_valuation(&DiscreteDistribution::point_mass(2.0, h).unwrap()),
            ironed_virtual_valuation(&DiscreteDistribution::uniform_over(&[1.0, 2.0], h).unwrap()),
        ];
        let a = SpAuction::new(phis, Environment::PublicProject { n: 3 }, Maximizer::Exact).unwrap();
        let o = a.run_sp(&[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(o.alloc, vec![1.0; 3]);
        assert_eq!(o.pay, vec![1.0, 2.0, 1.0]);
        // levels −1 + 2 + 0 still build the project
        let o = a.run_sp(&[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(o.revenue(), 4.0);
    }

    #[test]
    fn single_item_env_matches_myerson() {
        let h = 2.0;
        let phis = vec![
            ironed_virtual_valuation(&DiscreteDistribution::uniform_over(&[0.5, 1.0, 2.0], h).unwrap()),
            ironed_virtual_valuation(&DiscreteDistribution::uniform_over(&[1.0, 1.5], h).unwrap()),
        ];
        let sp = SpAuction::new(phis.clone(), Environment::SingleItem { n: 2 }, Maximizer::Exact).unwrap();
        let si = SingleItemAuction::new(phis).unwrap();
        for &a in &[0.0, 0.5, 0.7, 1.0, 1.5, 2.0] {
            for &b in &[0.0, 0.9, 1.0, 1.2, 1.5, 2.0] {
                assert_eq!(sp.run_sp(&[a, b]).unwrap(), si.run(&[a, b]));
            }
        }
    }

    #[test]
    fn approx_needs_knapsack() {
        let phi = SteppedVirtualValuation::below_all(1.0);
        assert!(SpAuction::new(vec![phi], Environment::SingleItem { n: 1 }, Maximizer::Approx).is_err());
    }
}
