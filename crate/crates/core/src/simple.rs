//! Simple auctions: a priority list of `(bidder, interval)` pairs.
//!
//! The first pair `(i, j)` with `v_i ≥ jε` names the winner, who pays the
//! smallest grid bid with which she would still come first. Every ε-coarse
//! Myersonian auction has exactly one canonical such list, which bounds the
//! number of coarse auctions by `(M+1)! · 2^M` with `M = n(⌊H/ε⌋ + 1)`.

use std::fmt::Write as _;

use crate::dist::EpsGrid;
use crate::error::{Error, Result};
use crate::myerson::{check_bids, Level, Mechanism, Outcome, SingleItemAuction, SteppedVirtualValuation};

#[derive(Clone, Debug, PartialEq)]
pub struct SimpleAuctionSequence {
    n: usize,
    grid: EpsGrid,
    pairs: Vec<(usize, usize)>,
}

impl SimpleAuctionSequence {
    /// Bidders are 0-based here; the text format is 1-based.
    pub fn new(n: usize, grid: EpsGrid, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &pairs {
            if i >= n || j >= grid.intervals() {
                return Err(Error::param(format!("pair ({}, {j}) out of range", i + 1)));
            }
            if !seen.insert((i, j)) {
                return Err(Error::param(format!("duplicate pair ({}, {j})", i + 1)));
            }
        }
        Ok(SimpleAuctionSequence { n, grid, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &EpsGrid {
        &self.grid
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Each listed pair is preceded by all higher intervals of its bidder.
    pub fn is_canonical(&self) -> bool {
        let mut next = vec![self.grid.top() as i64; self.n];
        for &(i, j) in &self.pairs {
            if j as i64 != next[i] {
                return false;
            }
            next[i] -= 1;
        }
        true
    }

    fn first_satisfied(&self, bids: &[f64], skip: Option<usize>) -> Option<usize> {
        self.pairs
            .iter()
            .position(|&(i, j)| Some(i) != skip && self.grid.index(bids[i]) >= j)
    }

    pub fn run(&self, bids: &[f64]) -> Outcome {
        let mut out = Outcome::empty(self.n);
        let Some(k) = self.first_satisfied(bids, None) else {
            return out;
        };
        let w = self.pairs[k].0;
        let stop = self.first_satisfied(bids, Some(w)).unwrap_or(self.pairs.len());
        let j = self.pairs[..stop]
            .iter()
            .filter(|&&(i, _)| i == w)
            .map(|&(_, j)| j)
            .min()
            .expect("the winning pair precedes every rival pair");
        out.alloc[w] = 1.0;
        out.pay[w] = self.grid.point(j);
        out
    }

    /// The canonical sequence of an ε-coarse Myersonian auction.
    pub fn encode(a: &SingleItemAuction, grid: &EpsGrid) -> Result<Self> {
        for (i, phi) in a.phis().iter().enumerate() {
            if let Some(&b) = phi.breakpoints().iter().find(|&&b| grid.point(grid.index(b)) != b) {
                return Err(Error::NotCoarse {
                    bidder: i,
                    breakpoint: b,
                });
            }
        }
        let mut cells = Vec::new();
        for (i, phi) in a.phis().iter().enumerate() {
            for j in 0..grid.intervals() {
                let l = phi.eval(grid.point(j));
                if l.is_nonnegative() {
                    cells.push((l, i, j));
                }
            }
        }
        cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(y.2.cmp(&x.2)));
        Self::new(a.n(), *grid, cells.into_iter().map(|(_, i, j)| (i, j)).collect())
    }

    /// A Myersonian auction with the same outcomes: the pair at position `k`
    /// gets level `K − k`, unlisted cells are `BelowAll`. Requires a
    /// canonical sequence.
    pub fn to_single_item(&self) -> Result<SingleItemAuction> {
        if !self.is_canonical() {
            return Err(Error::param("only canonical sequences decode to virtual valuations"));
        }
        let total = self.pairs.len();
        let mut per: Vec<Vec<(f64, Level)>> = vec![Vec::new(); self.n];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            per[i].push((self.grid.point(j), Level::Finite((total - k) as f64)));
        }
        let phis = per
            .into_iter()
            .map(|mut cells| {
                cells.reverse();
                let (b, l) = cells.into_iter().unzip();
                SteppedVirtualValuation::new(b, l, self.grid.h())
            })
            .collect::<Result<_>>()?;
        SingleItemAuction::new(phis)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.n, self.grid.h(), self.grid.eps());
        for &(i, j) in &self.pairs {
            writeln!(s, "{} {j}", i + 1).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header `n H eps`".into(),
        })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        if h.len() != 3 {
            return Err(bad(ln, "header must be `n H eps`"));
        }
        let n: usize = h[0].parse().map_err(|_| bad(ln, "bad n"))?;
        let hh: f64 = h[1].parse().map_err(|_| bad(ln, "bad H"))?;
        let eps: f64 = h[2].parse().map_err(|_| bad(ln, "bad eps"))?;
        let grid = EpsGrid::new(eps, hh).map_err(|e| bad(ln, &e.to_string()))?;
        let mut pairs = Vec::new();
        for (ln, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 {
                return Err(bad(ln, "expected `i j`"));
            }
            let i: usize = t[0].parse().map_err(|_| bad(ln, "bad bidder"))?;
            let j: usize = t[1].parse().map_err(|_| bad(ln, "bad interval"))?;
            if i == 0 {
                return Err(bad(ln, "bidders are numbered from 1"));
            }
            pairs.push((i - 1, j));
        }
        Self::new(n, grid, pairs).map_err(|e| bad(0, &e.to_string()))
    }
}

impl Mechanism for SimpleAuctionSequence {
    fn n(&self) -> usize {
        self.n
    }

    fn h(&self) -> f64 {
        self.grid.h()
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        check_bids(bids, self.n, self.grid.h())?;
        Ok(SimpleAuctionSequence::run(self, bids))
    }
}

/// `ln((M+1)! · 2^M)` with `M = n(⌊H/ε⌋ + 1)`.
pub fn class_size_log_bound(n: usize, grid: &EpsGrid) -> f64 {
    let m = n * grid.intervals();
    ln_factorial(m + 1) + m as f64 * std::f64::consts::LN_2
}

pub(crate) fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// Every canonical sequence for `n` bidders; only for tiny grids.
pub fn enumerate_canonical(n: usize, grid: &EpsGrid) -> Result<Vec<SimpleAuctionSequence>> {
    let top = grid.top();
    if n > 1 && n * grid.intervals() > 8 {
        return Err(Error::InstanceTooLarge {
            size: (n * grid.intervals()) as u128,
            limit: 8,
        });
    }
    let mut out = Vec::new();
    let mut lens = vec![0usize; n];
    loop {
        let mut chains: Vec<Vec<(usize, usize)>> = lens
            .iter()
            .enumerate()
            .map(|(i, &len)| (0..len).map(|d| (i, top - d)).collect())
            .collect();
        for c in &mut chains {
            c.reverse();
        }
        interleave(&mut chains, &mut Vec::new(), &mut |p| {
            out.push(SimpleAuctionSequence {
                n,
                grid: *grid,
                pairs: p.to_vec(),
            })
        });
        let mut k = 0;
        while k < n {
            lens[k] += 1;
            if lens[k] <= grid.intervals() {
                break;
            }
            lens[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(out)
}

type Cell = (usize, usize);

// chains are stored reversed so the next element is at the back
fn interleave(chains: &mut [Vec<Cell>], acc: &mut Vec<Cell>, emit: &mut dyn FnMut(&[Cell])) {
    if chains.iter().all(|c| c.is_empty()) {
        emit(acc);
        return;
    }
    for k in 0..chains.len() {
        if let Some(p) = chains[k].pop() {
            acc.push(p);
            interleave(chains, acc, emit);
            acc.pop();
            chains[k].push(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_examples() {
        let grid = EpsGrid::new(0.5, 1.0).unwrap();
        let p = SimpleAuctionSequence::new(2, grid, vec![(0, 1), (1, 0)]).unwrap();
        let o = p.run(&[0.3, 0.2]);
        assert_eq!(o.alloc, vec![0.0, 1.0]);
        assert_eq!(o.pay, vec![0.0, 0.0]);
        let o = p.run(&[0.7, 0.2]);
        assert_eq!(o.alloc, vec![1.0, 0.0]);
        assert_eq!(o.pay, vec![0.5, 0.0]);
        let empty = SimpleAuctionSequence::new(2, grid, vec![]).unwrap();
        assert_eq!(empty.run(&[1.0, 1.0]).revenue(), 0.0);
    }

    #[test]
    fn text_roundtrip() {
        let grid = EpsGrid::new(0.25, 1.0).unwrap();
        let p = SimpleAuctionSequence::new(2, grid, vec![(0, 4), (1, 4), (0, 3)]).unwrap();
        assert!(p.is_canonical());
        let back = SimpleAuctionSequence::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert!(SimpleAuctionSequence::from_text("2 1 0.5\n3 0\n").is_err());
        assert!(SimpleAuctionSequence::from_text("2 1 0.5\n1 0\n1 0\n").is_err());
    }

    #[test]
    fn canonical_count_within_bound() {
        let grid = EpsGrid::new(0.5, 1.0).unwrap();
        for n in 1..=2 {
            let all = enumerate_canonical(n, &grid).unwrap();
            assert!(all.iter().all(|s| s.is_canonical()));
            assert!((all.len() as f64).ln() <= class_size_log_bound(n, &grid));
        }
        // one bidder with 3 intervals: the empty list plus 3 thresholds
        assert_eq!(enumerate_canonical(1, &grid).unwrap().len(), 4);
    }
}
