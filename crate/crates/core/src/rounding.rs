//! ε-rounding of Myersonian auctions.
//!
//! A rounding action `(i, j, v)` with `v` in interval `j` makes bidder `i`'s
//! virtual valuation constant on that interval at its old value at `v`. Doing
//! this for every bidder and interval yields an ε-coarse auction.

use rand::Rng;

use crate::dist::{EpsGrid, ProductDistribution};
use crate::error::{Error, Result};
use crate::myerson::{Level, SingleItemAuction, SteppedVirtualValuation};
use crate::par::{map_indexed, Execution};
use crate::revenue::exact_revenue_single_item;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundingAction {
    pub bidder: usize,
    pub interval: usize,
    pub value: f64,
}

impl RoundingAction {
    pub fn new(grid: &EpsGrid, bidder: usize, interval: usize, value: f64) -> Result<Self> {
        if !grid.contains(interval, value) {
            return Err(Error::param(format!(
                "value {value} is not in interval {interval}"
            )));
        }
        Ok(RoundingAction {
            bidder,
            interval,
            value,
        })
    }
}

/// One representative `v_ij` per bidder and interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingRule {
    grid: EpsGrid,
    reps: Vec<Vec<f64>>,
}

impl RoundingRule {
    pub fn new(grid: EpsGrid, reps: Vec<Vec<f64>>) -> Result<Self> {
        for row in &reps {
            if row.len() != grid.intervals() {
                return Err(Error::DimensionMismatch {
                    expected: grid.intervals(),
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !grid.contains(j, v) {
                    return Err(Error::param(format!("representative {v} not in interval {j}")));
                }
            }
        }
        Ok(RoundingRule { grid, reps })
    }

    /// Every interval represented by its left grid point.
    pub fn left_endpoints(grid: EpsGrid, n: usize) -> Self {
        let row = (0..grid.intervals()).map(|j| grid.point(j)).collect();
        RoundingRule {
            grid,
            reps: vec![row; n],
        }
    }

    pub fn grid(&self) -> &EpsGrid {
        &self.grid
    }

    pub fn rep(&self, i: usize, j: usize) -> f64 {
        self.reps[i][j]
    }

    pub fn reps(&self) -> &[Vec<f64>] {
        &self.reps
    }

    pub fn actions(&self) -> impl Iterator<Item = RoundingAction> + '_ {
        self.reps.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().map(move |(j, &v)| RoundingAction {
                bidder: i,
                interval: j,
                value: v,
            })
        })
    }
}

/// Make `phi` constant on interval `j` at level `phi(v)`.
pub fn round_phi(
    phi: &SteppedVirtualValuation,
    grid: &EpsGrid,
    j: usize,
    v: f64,
) -> SteppedVirtualValuation {
    let h = phi.h();
    let (lo, hi) = (grid.lower(j), grid.upper(j));
    let inner = phi.eval(v);
    let right = phi.eval(hi);
    let mut bps = Vec::with_capacity(phi.breakpoints().len() + 2);
    let mut lvs: Vec<Level> = Vec::with_capacity(bps.capacity());
    for (&b, &l) in phi.breakpoints().iter().zip(phi.levels()) {
        if b < lo {
            bps.push(b);
            lvs.push(l);
        }
    }
    bps.push(lo);
    lvs.push(inner);
    if hi <= h && !phi.breakpoints().contains(&hi) {
        bps.push(hi);
        lvs.push(right);
    }
    for (&b, &l) in phi.breakpoints().iter().zip(phi.levels()) {
        if b >= hi {
            bps.push(b);
            lvs.push(l);
        }
    }
    SteppedVirtualValuation::normalized(bps, lvs, h)
}

pub fn apply_action(
    a: &SingleItemAuction,
    grid: &EpsGrid,
    act: RoundingAction,
) -> Result<SingleItemAuction> {
    if act.bidder >= a.n() {
        return Err(Error::param(format!("no bidder {}", act.bidder)));
    }
    let mut phis = a.phis().to_vec();
    phis[act.bidder] = round_phi(&phis[act.bidder], grid, act.interval, act.value);
    Ok(SingleItemAuction::new(phis)?.with_payment_rule(a.payment_rule()))
}

/// Apply a rule to a list of virtual valuations. Actions touch disjoint
/// `(bidder, interval)` cells, so the order does not matter.
pub fn round_phis(
    phis: &[SteppedVirtualValuation],
    rule: &RoundingRule,
) -> Result<Vec<SteppedVirtualValuation>> {
    if phis.len() != rule.reps.len() {
        return Err(Error::DimensionMismatch {
            expected: phis.len(),
            got: rule.reps.len(),
        });
    }
    Ok(phis
        .iter()
        .zip(&rule.reps)
        .map(|(phi, row)| {
            row.iter()
                .enumerate()
                .fold(phi.clone(), |p, (j, &v)| round_phi(&p, &rule.grid, j, v))
        })
        .collect())
}

pub fn apply_rule(a: &SingleItemAuction, rule: &RoundingRule) -> Result<SingleItemAuction> {
    Ok(SingleItemAuction::new(round_phis(a.phis(), rule)?)?.with_payment_rule(a.payment_rule()))
}

/// Draw `v_ij ∼ F_i|_j`, falling back to `jε` for intervals without mass.
pub fn draw_randomized_rule<R: Rng + ?Sized>(
    f: &ProductDistribution,
    grid: &EpsGrid,
    rng: &mut R,
) -> RoundingRule {
    let reps = f
        .factors()
        .iter()
        .map(|fi| {
            (0..grid.intervals())
                .map(|j| match fi.conditional_on_interval(grid, j) {
                    Some(c) => c.sample(rng),
                    None => grid.point(j),
                })
                .collect()
        })
        .collect();
    RoundingRule { grid: *grid, reps }
}

/// Round `a` with a rule drawn from `F`.
pub fn randomized_round(
    a: &SingleItemAuction,
    f: &ProductDistribution,
    grid: &EpsGrid,
    seed: u64,
) -> Result<(SingleItemAuction, RoundingRule)> {
    let mut rng = crate::dist::seeded_rng(seed);
    let rule = draw_randomized_rule(f, grid, &mut rng);
    Ok((apply_rule(a, &rule)?, rule))
}

/// Deterministic rounding that loses less than `nε` revenue on `F̂`.
///
/// Bidders and intervals are visited in order. For each cell the candidate
/// representatives are the support points of `F̂_i` inside the interval;
/// the one with the highest exact revenue is kept (ties to the smallest
/// value). Cells without support are already constant and are skipped.
pub fn greedy_round(
    a: &SingleItemAuction,
    fhat: &ProductDistribution,
    grid: &EpsGrid,
    exec: Execution,
) -> Result<SingleItemAuction> {
    let mut cur = a.clone();
    for i in 0..a.n() {
        let support = fhat.factor(i).support();
        for j in 0..grid.intervals() {
            let cands: Vec<f64> = support
                .iter()
                .copied()
                .filter(|&v| grid.contains(j, v))
                .collect();
            if cands.is_empty() {
                continue;
            }
            let scored = map_indexed(exec, cands.len(), |k| -> Result<(f64, SingleItemAuction)> {
                let next = apply_action(&cur, grid, RoundingAction::new(grid, i, j, cands[k])?)?;
                Ok((exact_revenue_single_item(&next, fhat)?, next))
            });
            let mut best: Option<(f64, SingleItemAuction)> = None;
            for s in scored {
                let (r, next) = s?;
                // candidates are ascending, so only a strict improvement moves
                if best.as_ref().is_none_or(|(br, _)| r > *br + 1e-12) {
                    best = Some((r, next));
                }
            }
            cur = best.expect("nonempty candidates").1;
        }
    }
    Ok(cur)
}

/// The naive rounding: treat every bid as `⌊v⌋_ε`.
pub fn round_down_baseline(a: &SingleItemAuction, grid: &EpsGrid) -> Result<SingleItemAuction> {
    apply_rule(a, &RoundingRule::left_endpoints(*grid, a.n()))
}
