//! Identical bidders: second-price auctions with a reserve and ironed
//! intervals, their grid round-down, and the sample-size bound.

use std::fmt::Write as _;

use crate::dist::{DiscreteDistribution, EmpiricalSamples, EpsGrid, ProductDistribution};
use crate::error::{Error, Result};
use crate::learn::{revenue_entry, LearnReport, RevenueEntry, SamplePolicy};
use crate::myerson::{check_bids, ironed_virtual_valuation, Mechanism, Outcome, SingleItemAuction};
use crate::par::Execution;
use crate::revenue::exact_revenue_single_item;

/// The auction `(p, I)`: no sale if every bid is below `p`; otherwise the
/// highest bid wins, except that when the highest bid shares an ironed
/// interval `[ℓ, h)` with other bids, the lowest-indexed bidder in that
/// interval wins. The winner pays her minimal winning bid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReserveIronedAuction {
    n: usize,
    h: f64,
    p: f64,
    intervals: Vec<(f64, f64)>,
}

impl ReserveIronedAuction {
    pub fn new(n: usize, h: f64, p: f64, intervals: Vec<(f64, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("auction needs at least one bidder"));
        }
        if !(h.is_finite() && h > 0.0) || !(0.0..=h).contains(&p) {
            return Err(Error::OutOfRange { value: p, h });
        }
        let mut prev = p;
        for &(l, hi) in &intervals {
            if !(l >= prev && l < hi && hi <= h) {
                return Err(Error::param(format!(
                    "ironed interval [{l}, {hi}) must be nonempty, sorted, disjoint, and within [p, H]"
                )));
            }
            prev = hi;
        }
        Ok(ReserveIronedAuction { n, h, p, intervals })
    }

    pub fn reserve(&self) -> f64 {
        self.p
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn interval_of(&self, v: f64) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|&(l, h)| l <= v && v < h)
    }

    pub fn winner(&self, bids: &[f64]) -> Option<usize> {
        let top = bids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top < self.p {
            return None;
        }
        if let Some((l, h)) = self.interval_of(top) {
            let mut inside = (0..bids.len()).filter(|&i| l <= bids[i] && bids[i] < h);
            let first = inside.next();
            if inside.next().is_some() {
                return first;
            }
        }
        bids.iter().position(|&b| b == top)
    }

    /// The infimum of `i`'s winning bids against `bids_{-i}`. Outcomes only
    /// change at the reserve, interval endpoints, and the other bids, so it
    /// suffices to probe those points and the gaps between them.
    pub fn minimal_winning_bid(&self, i: usize, bids: &[f64]) -> Option<f64> {
        let mut cands = vec![0.0, self.p, self.h];
        for &(l, h) in &self.intervals {
            cands.push(l);
            cands.push(h);
        }
        cands.extend(bids.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &b)| b));
        cands.retain(|&c| (0.0..=self.h).contains(&c));
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let mut probe = bids.to_vec();
        let mut wins = |b: f64| {
            probe[i] = b;
            self.winner(&probe) == Some(i)
        };
        for k in 0..cands.len() {
            if wins(cands[k]) {
                return Some(cands[k]);
            }
            if k + 1 < cands.len() && wins(0.5 * (cands[k] + cands[k + 1])) {
                return Some(cands[k]);
            }
        }
        None
    }

    pub fn run(&self, bids: &[f64]) -> Outcome {
        let mut out = Outcome::empty(bids.len());
        if let Some(w) = self.winner(bids) {
            out.alloc[w] = 1.0;
            out.pay[w] = self
                .minimal_winning_bid(w, bids)
                .expect("the winner's own bid wins");
        }
        out
    }

    /// `⌊(p, I)⌋_ε`: reserve and endpoints rounded down to the grid;
    /// intervals that collapse are dropped.
    pub fn round_down(&self, grid: &EpsGrid) -> Self {
        let intervals = self
            .intervals
            .iter()
            .map(|&(l, h)| (grid.floor(l), grid.floor(h)))
            .filter(|&(l, h)| l < h)
            .collect();
        ReserveIronedAuction {
            n: self.n,
            h: self.h,
            p: grid.floor(self.p),
            intervals,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("reserve-ironed {} {}\np {}\n", self.n, self.h, self.p);
        for &(l, h) in &self.intervals {
            writeln!(s, "[{l} {h})").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, head) = lines.next().ok_or(bad(1, "empty file"))?;
        let t: Vec<&str> = head.split_whitespace().collect();
        if t.len() != 3 || t[0] != "reserve-ironed" {
            return Err(bad(ln, "header must be `reserve-ironed n H`"));
        }
        let n: usize = t[1].parse().map_err(|_| bad(ln, "bad n"))?;
        let h: f64 = t[2].parse().map_err(|_| bad(ln, "bad H"))?;
        let (ln, pl) = lines.next().ok_or(bad(ln + 1, "missing `p` line"))?;
        let p: f64 = pl
            .strip_prefix('p')
            .map(str::trim)
            .and_then(|x| x.parse().ok())
            .ok_or(bad(ln, "expected `p <value>`"))?;
        let mut intervals = Vec::new();
        for (ln, l) in lines {
            let inner = l
                .strip_prefix('[')
                .and_then(|x| x.strip_suffix(')'))
                .ok_or(bad(ln, "expected `[l h)`"))?;
            let v: Vec<f64> = inner
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad(ln, "bad number")))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(bad(ln, "expected two endpoints"));
            }
            intervals.push((v[0], v[1]));
        }
        Self::new(n, h, p, intervals).map_err(|e| bad(0, &e.to_string()))
    }
}

impl Mechanism for ReserveIronedAuction {
    fn n(&self) -> usize {
        self.n
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        check_bids(bids, self.n, self.h)?;
        Ok(ReserveIronedAuction::run(self, bids))
    }
}

/// The optimal `(p, I)` for `F̂^n`. The reserve is the smallest support
/// value with `φ ≥ 0`; the ironed intervals are the maximal intervals on
/// which the stepped `φ` is constant and nonnegative.
pub fn optimal_reserve_ironed(fhat: &DiscreteDistribution, n: usize) -> Result<ReserveIronedAuction> {
    let phi = ironed_virtual_valuation(fhat);
    let vs = fhat.support();
    let h = fhat.h();
    let levels: Vec<_> = vs.iter().map(|&v| phi.eval(v)).collect();
    let start = levels
        .iter()
        .position(|l| l.is_nonnegative())
        .expect("the top support value has φ = v ≥ 0");
    let mut intervals = Vec::new();
    let mut a = start;
    while a < vs.len() {
        let mut b = a;
        while b + 1 < vs.len() && levels[b + 1] == levels[a] {
            b += 1;
        }
        let hi = if b + 1 < vs.len() { vs[b + 1] } else { h };
        if vs[a] < hi {
            intervals.push((vs[a], hi));
        }
        a = b + 1;
    }
    ReserveIronedAuction::new(n, h, vs[start], intervals)
}

/// The Myersonian auction with `n` copies of `F̂`'s ironed virtual valuation.
pub fn symmetric_myersonian(fhat: &DiscreteDistribution, n: usize) -> Result<SingleItemAuction> {
    SingleItemAuction::new(vec![ironed_virtual_valuation(fhat); n])
}

/// A rounded `(p, I)` as grid data: the reserve's grid index plus interval
/// start and end flags at every grid point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridFlags {
    pub reserve: usize,
    pub starts: Vec<bool>,
    pub ends: Vec<bool>,
}

pub fn encode_flags(a: &ReserveIronedAuction, grid: &EpsGrid) -> Result<GridFlags> {
    let on_grid = |v: f64| -> Result<usize> {
        let j = grid.index(v);
        if grid.point(j) == v {
            Ok(j)
        } else {
            Err(Error::param(format!("{v} is not a grid point")))
        }
    };
    let mut starts = vec![false; grid.intervals()];
    let mut ends = vec![false; grid.intervals()];
    for &(l, h) in a.intervals() {
        starts[on_grid(l)?] = true;
        ends[on_grid(h)?] = true;
    }
    Ok(GridFlags {
        reserve: on_grid(a.reserve())?,
        starts,
        ends,
    })
}

pub fn decode_flags(flags: &GridFlags, grid: &EpsGrid, n: usize) -> Result<ReserveIronedAuction> {
    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    for j in 0..grid.intervals() {
        let x = grid.point(j);
        if flags.ends[j] {
            if let Some(l) = open.take() {
                intervals.push((l, x));
            }
        }
        if flags.starts[j] {
            open = Some(x);
        }
    }
    ReserveIronedAuction::new(n, grid.h(), grid.point(flags.reserve), intervals)
}

/// `ln(I · 4^I)` with `I = ⌊H/ε⌋ + 1` grid points.
pub fn rounded_class_log_bound(grid: &EpsGrid) -> f64 {
    let i = grid.intervals() as f64;
    i.ln() + i * 4f64.ln()
}

fn ln_falling(t: u64, n: usize) -> f64 {
    // ln((t−1)!/(t−n)!)
    ((t + 1 - n as u64)..t).map(|k| (k as f64).ln()).sum()
}

/// Smallest `t ≥ n` with both
/// `(t−1)!/(t−n)! · (n(n−1)+1) · 2·exp(−√t ε²/(2H²)) ≤ δ` and
/// `(t−1)!/(t−n)! · (t − n(n−1)√t)/tⁿ ≥ 1 − ε/(2H)`, with `δ` as `ln δ`.
pub fn sample_size_iid_ln(h: f64, n: usize, eps: f64, ln_delta: f64) -> u64 {
    let nn = (n * n.saturating_sub(1)) as f64;
    let ok = |t: u64| {
        if t < n as u64 {
            return false;
        }
        let tf = t as f64;
        let lf = ln_falling(t, n);
        let a = lf + (nn + 1.0).ln() + std::f64::consts::LN_2 - tf.sqrt() * eps * eps / (2.0 * h * h);
        let room = tf - nn * tf.sqrt();
        if room <= 0.0 {
            return false;
        }
        let b = lf + room.ln() - n as f64 * tf.ln();
        a <= ln_delta && b >= (1.0 - eps / (2.0 * h)).ln()
    };
    let lo0 = (n as u64).max(1);
    if ok(lo0) {
        return lo0;
    }
    let mut hi = lo0 * 2;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn sample_size_iid(h: f64, n: usize, eps: f64, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) || !(eps > 0.0 && eps <= h) || n == 0 {
        return Err(Error::param("need n ≥ 1, 0 < ε ≤ H, 0 < δ < 1"));
    }
    Ok(sample_size_iid_ln(h, n, eps, delta.ln()))
}

/// Samples from `F` so that every rounded `(p, I)` at grid `ε` is estimated
/// within `ε` on `F^n` simultaneously.
pub fn uniform_sample_size_iid(h: f64, n: usize, eps: f64, delta: f64) -> Result<u64> {
    sample_size_iid(h, n, eps, delta)?;
    let grid = EpsGrid::new(eps, h)?;
    let log_size = rounded_class_log_bound(&grid);
    let ln_delta = delta.ln() - (log_size + (-log_size).exp().ln_1p());
    Ok(sample_size_iid_ln(h, n, eps, ln_delta))
}

pub struct LearnedIid {
    pub auction: ReserveIronedAuction,
    pub unrounded: ReserveIronedAuction,
    pub report: LearnReport,
}

/// Learn for `n` identical bidders from a pooled sample of `F`: optimal
/// `(p, I)` for `F̂^n`, rounded down to the `ε/3` grid.
#[allow(clippy::too_many_arguments)]
pub fn learn_iid(
    samples: &[f64],
    n: usize,
    h: f64,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    seed: u64,
    exec: Execution,
) -> Result<LearnedIid> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let step = eps / 3.0;
    let grid = EpsGrid::new(step, h)?;
    let t_required = uniform_sample_size_iid(h, n, step, delta)?;
    let available = samples.len() as u64;
    let waived = available < t_required;
    if waived && policy == SamplePolicy::Enforce {
        return Err(Error::InsufficientSamples {
            what: "identical-bidder learning",
            required: t_required,
            available,
        });
    }
    let fhat = DiscreteDistribution::empirical(samples, h)?;
    let unrounded = optimal_reserve_ironed(&fhat, n)?;
    let auction = unrounded.round_down(&grid);
    let prod = ProductDistribution::iid(fhat.clone(), n)?;
    let sym = symmetric_myersonian(&fhat, n)?;
    let revenues: Vec<RevenueEntry> = vec![
        RevenueEntry {
            label: "optimal_empirical".into(),
            value: exact_revenue_single_item(&sym, &prod)?,
            mode: "exact".into(),
            std_error: None,
        },
        revenue_entry("learned_empirical", &auction, &prod, seed, exec)?,
    ];
    let mut caveats = Vec::new();
    if waived {
        caveats.push(format!(
            "uniform convergence: guarantee needs {t_required} samples, only {available} used"
        ));
    }
    let report = LearnReport {
        pipeline: "iid".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        n,
        h,
        eps,
        delta,
        grid_step: step,
        samples_available: available,
        t_required,
        t_used: available,
        s_required: None,
        derandomization: None,
        requirement_waived: waived,
        caveats,
        e_bit: None,
        revenues,
        auction: auction.to_text(),
    };
    Ok(LearnedIid {
        auction,
        unrounded,
        report,
    })
}

/// Convenience wrapper pooling every column of a sample table.
pub fn learn_iid_from_table(
    samples: &EmpiricalSamples,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    seed: u64,
    exec: Execution,
) -> Result<LearnedIid> {
    learn_iid(
        &samples.pooled(),
        samples.n(),
        samples.h(),
        eps,
        delta,
        policy,
        seed,
        exec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_examples() {
        let a = ReserveIronedAuction::new(2, 3.0, 1.0, vec![]).unwrap();
        let o = a.run(&[2.0, 3.0]);
        assert_eq!(o.alloc, vec![0.0, 1.0]);
        assert_eq!(o.pay, vec![0.0, 2.0]);
        assert_eq!(a.run(&[0.5, 0.9]).revenue(), 0.0);
        assert_eq!(a.run(&[0.5, 2.0]).pay, vec![0.0, 1.0]);

        let a = ReserveIronedAuction::new(3, 3.0, 0.5, vec![(1.0, 2.0)]).unwrap();
        // 1.8 and 1.2 share the interval: the lower index wins at the interval start
        let o = a.run(&[0.7, 1.8, 1.2]);
        assert_eq!(o.alloc, vec![0.0, 1.0, 0.0]);
        assert_eq!(o.pay, vec![0.0, 1.0, 0.0]);
        let o = a.run(&[0.7, 1.2, 1.8]);
        assert_eq!(o.alloc, vec![0.0, 1.0, 0.0]);
        // bidder 3 alone above the interval pays its upper end
        let o = a.run(&[0.7, 1.2, 2.5]);
        assert_eq!(o.pay, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn round_down_example() {
        let grid = EpsGrid::new(0.4, 4.0).unwrap();
        let a = ReserveIronedAuction::new(2, 4.0, 3.0, vec![(3.0, 3.3), (3.3, 3.5)]).unwrap();
        let r = a.round_down(&grid);
        assert!((r.reserve() - 2.8).abs() < 1e-12);
        // [3.3, 3.5) collapses onto 3.2
        assert_eq!(r.intervals().len(), 1);
        assert!((r.intervals()[0].1 - 3.2).abs() < 1e-12);
    }

    #[test]
    fn optimal_examples() {
        let f = DiscreteDistribution::uniform_over(&[1.0, 3.0], 3.0).unwrap();
        let a = optimal_reserve_ironed(&f, 2).unwrap();
        assert_eq!(a.reserve(), 3.0);
        assert!(a.intervals().is_empty());
        let f = DiscreteDistribution::uniform_over(&[1.0, 2.0], 2.0).unwrap();
        let a = optimal_reserve_ironed(&f, 2).unwrap();
        assert_eq!(a.reserve(), 1.0);
        assert_eq!(a.intervals(), &[(1.0, 2.0)]);
    }

    #[test]
    fn flags_roundtrip() {
        let grid = EpsGrid::new(0.25, 2.0).unwrap();
        let a = ReserveIronedAuction::new(3, 2.0, 0.25, vec![(0.5, 1.0), (1.0, 1.75)]).unwrap();
        let f = encode_flags(&a, &grid).unwrap();
        assert_eq!(decode_flags(&f, &grid, 3).unwrap(), a);
    }

    #[test]
    fn text_roundtrip() {
        let a = ReserveIronedAuction::new(3, 2.0, 0.3, vec![(0.5, 1.1)]).unwrap();
        assert_eq!(ReserveIronedAuction::from_text(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn one_bidder_sample_size_reduces() {
        let t = sample_size_iid(1.0, 1, 0.5, 0.1).unwrap();
        let g = |t: u64| 2.0 * (-(t as f64).sqrt() * 0.25 / 2.0).exp();
        assert!(g(t) <= 0.1 && g(t - 1) > 0.1);
    }
}
