//! Myersonian auctions: stepped virtual valuations, discrete ironing, and
//! the single-item allocation and payment rules.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDistribution, EpsGrid};
use crate::error::{Error, Result};

/// A virtual-value level. `BelowAll` sits strictly below every finite level
/// and never wins; it marks values below the first breakpoint.
#[derive(Clone, Copy, Debug)]
pub enum Level {
    BelowAll,
    Finite(f64),
}

impl Level {
    pub fn finite(self) -> Option<f64> {
        match self {
            Level::BelowAll => None,
            Level::Finite(x) => Some(x),
        }
    }

    pub fn is_nonnegative(self) -> bool {
        matches!(self, Level::Finite(x) if x >= 0.0)
    }

    /// The level as a real, with `BelowAll` mapped to `-∞`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }
}

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Level::BelowAll, Level::BelowAll) => Ordering::Equal,
            (Level::BelowAll, _) => Ordering::Less,
            (_, Level::BelowAll) => Ordering::Greater,
            // NaN is rejected at construction
            (Level::Finite(a), Level::Finite(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        }
    }
}

/// Does `(level a, index a)` take precedence over `(level b, index b)`?
/// Higher level first, ties to the lower index.
#[inline]
pub fn precedes(a: Level, ia: usize, b: Level, ib: usize) -> bool {
    match a.cmp(&b) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => ia < ib,
    }
}

/// A nondecreasing, right-continuous step function on `[0, H]`.
///
/// `φ(v)` is the level of the greatest breakpoint `≤ v`, or `BelowAll` if
/// there is none. Stored in normal form: no redundant breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SteppedVirtualValuation {
    breakpoints: Vec<f64>,
    levels: Vec<Level>,
    h: f64,
}

impl SteppedVirtualValuation {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<Level>, h: f64) -> Result<Self> {
        if breakpoints.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len(),
                got: levels.len(),
            });
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("H must be positive, got {h}")));
        }
        for (k, &b) in breakpoints.iter().enumerate() {
            if !b.is_finite() || b < 0.0 || b > h {
                return Err(Error::OutOfRange { value: b, h });
            }
            if k > 0 && breakpoints[k - 1] >= b {
                return Err(Error::param("breakpoints must be strictly increasing"));
            }
        }
        for (k, l) in levels.iter().enumerate() {
            if let Level::Finite(x) = l {
                if !x.is_finite() {
                    return Err(Error::param(format!("level {x} is not finite")));
                }
            }
            if k > 0 && levels[k - 1] > *l {
                return Err(Error::MonotonicityViolated { bidder: 0 });
            }
        }
        Ok(Self::normalized(breakpoints, levels, h))
    }

    /// The function that is `BelowAll` everywhere.
    pub fn below_all(h: f64) -> Self {
        SteppedVirtualValuation {
            breakpoints: Vec::new(),
            levels: Vec::new(),
            h,
        }
    }

    /// `BelowAll` below `v`, constant `level` from `v` on.
    pub fn single_step(v: f64, level: f64, h: f64) -> Result<Self> {
        Self::new(vec![v], vec![Level::Finite(level)], h)
    }

    pub(crate) fn normalized(breakpoints: Vec<f64>, levels: Vec<Level>, h: f64) -> Self {
        let mut bps = Vec::with_capacity(breakpoints.len());
        let mut lvs: Vec<Level> = Vec::with_capacity(levels.len());
        for (b, l) in breakpoints.into_iter().zip(levels) {
            let prev = lvs.last().copied().unwrap_or(Level::BelowAll);
            if l != prev {
                bps.push(b);
                lvs.push(l);
            }
        }
        SteppedVirtualValuation {
            breakpoints: bps,
            levels: lvs,
            h,
        }
    }

    pub fn eval(&self, v: f64) -> Level {
        let k = self.breakpoints.partition_point(|&b| b <= v);
        if k == 0 {
            Level::BelowAll
        } else {
            self.levels[k - 1]
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Smallest breakpoint whose level satisfies a monotone predicate.
    pub fn first_breakpoint_where(&self, pred: impl Fn(Level) -> bool) -> Option<f64> {
        let k = self.levels.partition_point(|&l| !pred(l));
        self.breakpoints.get(k).copied()
    }

    /// Constant on every grid interval, i.e. every breakpoint is a grid point.
    pub fn is_coarse(&self, grid: &EpsGrid) -> bool {
        self.breakpoints
            .iter()
            .all(|&b| grid.point(grid.index(b)) == b)
    }
}

/// The ironed virtual valuation of a discrete distribution.
///
/// Builds the revenue curve in quantile space, with points `(q_k, q_k v_k)`
/// where `q_k = P(V ≥ v_k)`, and takes its upper concave envelope.
/// `φ(v_k)` is the slope of the envelope over `(q_{k+1}, q_k]`. Support points
/// sharing a hull segment share the exact same level.
pub fn ironed_virtual_valuation(f: &DiscreteDistribution) -> SteppedVirtualValuation {
    let vs = f.support();
    let ps = f.probs();
    let k = vs.len();
    let mut q = vec![0.0; k + 1];
    for m in (0..k).rev() {
        q[m] = q[m + 1] + ps[m];
    }
    // x ascending: origin, then the highest value first
    let mut pts = Vec::with_capacity(k + 1);
    pts.push((0.0, 0.0));
    for m in (0..k).rev() {
        pts.push((q[m], q[m] * vs[m]));
    }
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for c in 0..pts.len() {
        while hull.len() >= 2 {
            let a = pts[hull[hull.len() - 2]];
            let b = pts[hull[hull.len() - 1]];
            let (bx, by) = (b.0 - a.0, b.1 - a.1);
            let (cx, cy) = (pts[c].0 - a.0, pts[c].1 - a.1);
            let cross = bx * cy - by * cx;
            let scale = bx.hypot(by) * cx.hypot(cy);
            if cross >= -1e-12 * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }
    let mut slope_of_point = vec![0.0; pts.len()];
    for w in hull.windows(2) {
        let (a, b) = (pts[w[0]], pts[w[1]]);
        let s = if w[1] == w[0] + 1 {
            // unironed: v_m − q_{m+1}(v_{m+1} − v_m)/f_m, exact at the top value
            let m = k - w[1];
            let above = if m + 1 < k { q[m + 1] * (vs[m + 1] - vs[m]) / ps[m] } else { 0.0 };
            vs[m] - above
        } else {
            (b.1 - a.1) / (b.0 - a.0)
        };
        for s_p in &mut slope_of_point[w[0] + 1..=w[1]] {
            *s_p = s;
        }
    }
    // point p (1-based along x) is support index k - p
    let levels = (0..k)
        .map(|m| Level::Finite(slope_of_point[k - m]))
        .collect();
    SteppedVirtualValuation::normalized(vs.to_vec(), levels, f.h())
}

/// Allocation and payments of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub alloc: Vec<f64>,
    pub pay: Vec<f64>,
}

impl Outcome {
    pub fn empty(n: usize) -> Self {
        Outcome {
            alloc: vec![0.0; n],
            pay: vec![0.0; n],
        }
    }

    pub fn revenue(&self) -> f64 {
        self.pay.iter().sum()
    }

    /// The unique bidder with allocation 1, for single-item outcomes.
    pub fn winner(&self) -> Option<usize> {
        self.alloc.iter().position(|&x| x > 0.0)
    }
}

/// A direct-revelation mechanism on bids in `[0, H]`.
pub trait Mechanism: Sync {
    fn n(&self) -> usize;
    fn h(&self) -> f64;
    fn run(&self, bids: &[f64]) -> Result<Outcome>;
}

/// How the winner of a Myersonian auction is charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentRule {
    /// The minimal winning bid (truthful).
    #[default]
    Threshold,
    /// The winner's own bid. Not truthful; useful as a negative control.
    FirstPrice,
}

/// The single-item Myersonian auction: the highest nonnegative virtual value
/// wins, ties go to the lowest index, and the winner pays the smallest bid
/// with which she would still win.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleItemAuction {
    phis: Vec<SteppedVirtualValuation>,
    h: f64,
    payment: PaymentRule,
}

impl SingleItemAuction {
    pub fn new(phis: Vec<SteppedVirtualValuation>) -> Result<Self> {
        let h = phis
            .first()
            .ok_or_else(|| Error::param("auction needs at least one bidder"))?
            .h();
        if phis.iter().any(|p| p.h() != h) {
            return Err(Error::param("all virtual valuations must share H"));
        }
        Ok(SingleItemAuction {
            phis,
            h,
            payment: PaymentRule::Threshold,
        })
    }

    /// The optimal auction for `F = F_1 × … × F_n` (ironed φ per bidder).
    pub fn optimal(f: &crate::dist::ProductDistribution) -> Self {
        let phis = f.factors().iter().map(ironed_virtual_valuation).collect();
        Self::new(phis).expect("nonempty product")
    }

    pub fn with_payment_rule(mut self, rule: PaymentRule) -> Self {
        self.payment = rule;
        self
    }

    pub fn payment_rule(&self) -> PaymentRule {
        self.payment
    }

    pub fn phis(&self) -> &[SteppedVirtualValuation] {
        &self.phis
    }

    pub fn phi(&self, i: usize) -> &SteppedVirtualValuation {
        &self.phis[i]
    }

    pub fn n(&self) -> usize {
        self.phis.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn into_phis(self) -> Vec<SteppedVirtualValuation> {
        self.phis
    }

    /// The strongest competitor of bidder `i`, including the zero-level
    /// reserve bidder `n` that loses every tie.
    fn rival(&self, i: usize, bids: &[f64]) -> (Level, usize) {
        let mut best = (Level::Finite(0.0), self.n());
        for (k, phi) in self.phis.iter().enumerate() {
            if k == i {
                continue;
            }
            let l = phi.eval(bids[k]);
            if precedes(l, k, best.0, best.1) {
                best = (l, k);
            }
        }
        best
    }

    pub fn winner(&self, bids: &[f64]) -> Option<usize> {
        let mut best = (Level::Finite(0.0), self.n());
        for (k, phi) in self.phis.iter().enumerate() {
            let l = phi.eval(bids[k]);
            if precedes(l, k, best.0, best.1) {
                best = (l, k);
            }
        }
        (best.1 < self.n()).then_some(best.1)
    }

    /// The smallest bid with which `i` wins against `bids_{-i}`.
    pub fn minimal_winning_bid(&self, i: usize, bids: &[f64]) -> Option<f64> {
        let (rl, ri) = self.rival(i, bids);
        self.phis[i].first_breakpoint_where(|l| precedes(l, i, rl, ri))
    }

    pub fn run(&self, bids: &[f64]) -> Outcome {
        let mut out = Outcome::empty(self.n());
        if let Some(w) = self.winner(bids) {
            out.alloc[w] = 1.0;
            out.pay[w] = match self.payment {
                PaymentRule::Threshold => self
                    .minimal_winning_bid(w, bids)
                    .expect("a winner has a winning breakpoint"),
                PaymentRule::FirstPrice => bids[w],
            };
        }
        out
    }

    pub fn is_coarse(&self, grid: &EpsGrid) -> bool {
        self.phis.iter().all(|p| p.is_coarse(grid))
    }
}

impl Mechanism for SingleItemAuction {
    fn n(&self) -> usize {
        self.phis.len()
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        check_bids(bids, self.phis.len(), self.h)?;
        Ok(SingleItemAuction::run(self, bids))
    }
}

pub(crate) fn check_bids(bids: &[f64], n: usize, h: f64) -> Result<()> {
    if bids.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bids.len(),
        });
    }
    for &b in bids {
        if !(0.0..=h).contains(&b) {
            return Err(Error::OutOfRange { value: b, h });
        }
    }
    Ok(())
}
