//! Reproducible fixtures behind the lower-bound and counterexample results.

use rand::Rng;

use crate::dist::{seeded_rng, DiscreteDistribution, EpsGrid, ProductDistribution, SampleSource};
use crate::error::Result;
use crate::iid::ReserveIronedAuction;
use crate::myerson::{check_bids, Level, Mechanism, Outcome, SingleItemAuction, SteppedVirtualValuation};
use crate::par::Execution;
use crate::revenue::{brute_force_opt, brute_force_revenue, exact_revenue_single_item, monte_carlo, Estimate};
use crate::rounding::{apply_rule, RoundingRule};
use crate::simple::enumerate_canonical;

/// One bidder with value 0 w.p. `1 − p` and `v = 3η/2` w.p. `p = 2/3`.
/// The optimum earns `η`, yet every auction on the ε-grid earns nothing.
pub struct Tight {
    pub eps: f64,
    pub eta: f64,
    pub h: f64,
}

impl Default for Tight {
    fn default() -> Self {
        Tight {
            eps: 0.1,
            eta: 0.05,
            h: 1.0,
        }
    }
}

pub struct TightResult {
    pub opt_revenue: f64,
    pub myerson_revenue: f64,
    pub best_coarse_revenue: f64,
    pub coarse_auctions_checked: usize,
}

impl Tight {
    pub fn value(&self) -> f64 {
        1.5 * self.eta
    }

    pub fn distribution(&self) -> Result<ProductDistribution> {
        let p = 2.0 / 3.0;
        ProductDistribution::new(vec![DiscreteDistribution::new(
            vec![0.0, self.value()],
            vec![1.0 - p, p],
            self.h,
        )?])
    }

    pub fn check(&self) -> Result<TightResult> {
        let f = self.distribution()?;
        let grid = EpsGrid::new(self.eps, self.h)?;
        let opt = brute_force_opt(&f)?.revenue;
        let myerson = SingleItemAuction::optimal(&f);
        let myerson_revenue = exact_revenue_single_item(&myerson, &f)?;
        let mut best = f64::NEG_INFINITY;
        let mut checked = 0;
        for s in enumerate_canonical(1, &grid)? {
            best = best.max(brute_force_revenue(&s, &f, Execution::Sequential)?);
            checked += 1;
        }
        // every rounding of the optimum, too
        for &v in f.factor(0).support() {
            let mut rule = RoundingRule::left_endpoints(grid, 1).reps().to_vec();
            rule[0][grid.index(v)] = v;
            let r = apply_rule(&myerson, &RoundingRule::new(grid, rule)?)?;
            best = best.max(exact_revenue_single_item(&r, &f)?);
            checked += 1;
        }
        Ok(TightResult {
            opt_revenue: opt,
            myerson_revenue,
            best_coarse_revenue: best,
            coarse_auctions_checked: checked,
        })
    }
}

/// Two bidders, `H = 2`: `F_1 = U[0, 2]` and `F_2` with density
/// `2(x − a)/ε²` on `[a, a + ε]`, `a = ⌊1⌋_ε − ε`. Rounding bids down to the
/// grid loses more than 1/8 of revenue here.
pub struct Triangle {
    pub eps: f64,
}

impl Triangle {
    pub const H: f64 = 2.0;

    pub fn base(&self) -> f64 {
        SampleSource::triangle_base(self.eps)
    }

    pub fn sources(&self) -> Vec<SampleSource> {
        vec![
            SampleSource::Uniform { lo: 0.0, hi: 2.0 },
            SampleSource::Triangle { eps: self.eps },
        ]
    }

    pub fn phi1(v: f64) -> f64 {
        2.0 * v - 2.0
    }

    pub fn phi1_inv(y: f64) -> f64 {
        (y + 2.0) / 2.0
    }

    /// `x − (1 − F_2(x))/f_2(x)`; `−∞` at or below `a`, `x` above `a + ε`.
    pub fn phi2(&self, x: f64) -> f64 {
        let u = x - self.base();
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= self.eps {
            x
        } else {
            x - (self.eps * self.eps - u * u) / (2.0 * u)
        }
    }

    pub fn phi2_inv(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (self.base(), Self::H);
        if self.phi2(hi) < y {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.phi2(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// The optimal auction with closed-form virtual values.
    pub fn closed_form_opt(&self) -> TriangleOpt {
        TriangleOpt { t: Triangle { eps: self.eps } }
    }

    /// The optimal auction with virtual values sampled on a fine grid.
    pub fn discretized_opt(&self, step: f64) -> Result<SingleItemAuction> {
        let h = Self::H;
        let count = (h / step).round() as usize;
        let xs: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(h)).collect();
        let phi1 = SteppedVirtualValuation::new(
            xs.clone(),
            xs.iter().map(|&x| Level::Finite(Self::phi1(x))).collect(),
            h,
        )?;
        let a = self.base();
        let fine: Vec<f64> = (1..=((self.eps / step * 10.0).round() as usize))
            .map(|k| a + k as f64 * step / 10.0)
            .chain(xs.iter().copied().filter(|&x| x > a + self.eps))
            .filter(|&x| x <= h)
            .collect();
        let mut fine = fine;
        fine.dedup_by(|x, y| x <= y);
        let phi2 = SteppedVirtualValuation::new(
            fine.clone(),
            fine.iter().map(|&x| Level::Finite(self.phi2(x))).collect(),
            h,
        )?;
        SingleItemAuction::new(vec![phi1, phi2])
    }

    /// Profiles where the optimum earns 7/6 and 4/3.
    pub fn witness_profiles(&self) -> [[f64; 2]; 2] {
        [
            [1.25, self.phi2_inv(1.0 / 3.0)],
            [1.5, self.phi2_inv(2.0 / 3.0)],
        ]
    }

    /// Revenue of the round-down auction: `(2 − ⌈1⌉_ε)/2 · ⌈1⌉_ε`.
    pub fn round_down_revenue(&self) -> f64 {
        let c = EpsGrid::new(self.eps, Self::H).unwrap().ceil(1.0);
        (2.0 - c) / 2.0 * c
    }

    /// Lower bound on the optimal revenue, `9/8 − 3ε/2`.
    pub fn opt_lower_bound(&self) -> f64 {
        9.0 / 8.0 - 1.5 * self.eps
    }

    /// Monte Carlo estimate of `Rev(OPT) − Rev(round-down)` with common
    /// random numbers, using the discretized optimum.
    pub fn round_down_gap(&self, trials: usize, seed: u64, exec: Execution) -> Result<(Estimate, Estimate, Estimate)> {
        let opt = self.discretized_opt(1e-4)?;
        let grid = EpsGrid::new(self.eps, Self::H)?;
        let rd = crate::rounding::round_down_baseline(&opt, &grid)?;
        let src = self.sources();
        let gap = monte_carlo(&src, trials, seed, exec, |v| {
            Ok(opt.run(v).revenue() - rd.run(v).revenue())
        })?;
        let ro = monte_carlo(&src, trials, seed, exec, |v| Ok(opt.run(v).revenue()))?;
        let rr = monte_carlo(&src, trials, seed, exec, |v| Ok(rd.run(v).revenue()))?;
        Ok((gap, ro, rr))
    }
}

pub struct TriangleOpt {
    t: Triangle,
}

impl Mechanism for TriangleOpt {
    fn n(&self) -> usize {
        2
    }

    fn h(&self) -> f64 {
        Triangle::H
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        check_bids(bids, 2, Triangle::H)?;
        let (l1, l2) = (Triangle::phi1(bids[0]), self.t.phi2(bids[1]));
        let mut out = Outcome::empty(2);
        if l1 >= 0.0 && l1 >= l2 {
            out.alloc[0] = 1.0;
            out.pay[0] = Triangle::phi1_inv(l2.max(0.0));
        } else if l2 >= 0.0 && l2 > l1 {
            out.alloc[1] = 1.0;
            out.pay[1] = self.t.phi2_inv(l1.max(0.0));
        }
        Ok(out)
    }
}

/// A random `(p, I)` auction on `[0, H]` with up to three ironed intervals.
pub fn random_reserve_ironed<R: Rng + ?Sized>(rng: &mut R, n: usize, h: f64) -> ReserveIronedAuction {
    let p = h * rng.gen::<f64>();
    let k = rng.gen_range(0..=3);
    let mut cuts: Vec<f64> = (0..2 * k).map(|_| p + (h - p) * rng.gen::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let intervals = cuts
        .chunks(2)
        .map(|c| (c[0], c[1]))
        .filter(|&(l, hi)| l < hi)
        .collect();
    ReserveIronedAuction::new(n, h, p, intervals).expect("valid by construction")
}

pub struct PerProfileResult {
    pub checks: usize,
    pub failures: usize,
    /// smallest `r_rounded − (r − ε)` seen
    pub worst_margin: f64,
}

/// Check `r^{⌊(p,I)⌋}(v) > r^{(p,I)}(v) − ε` on random auctions and profiles.
/// Profiles mix uniform values with grid points, the reserve, and interval
/// endpoints, where the rounding is most delicate.
pub fn iid_per_profile_check(checks: usize, seed: u64) -> PerProfileResult {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let eps_choices = [0.05, 0.1, 0.25, 0.3, 0.5];
    for _ in 0..checks {
        let h = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        let n = rng.gen_range(1..=5);
        let eps = eps_choices[rng.gen_range(0..eps_choices.len())];
        let grid = EpsGrid::new(eps, h).unwrap();
        let a = random_reserve_ironed(&mut rng, n, h);
        let r = a.round_down(&grid);
        let mut special = vec![a.reserve(), grid.floor(a.reserve())];
        for &(l, hi) in a.intervals() {
            special.extend([l, hi, grid.floor(l), grid.floor(hi)]);
        }
        let v: Vec<f64> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => h * rng.gen::<f64>(),
                1 => grid.point(rng.gen_range(0..grid.intervals())).min(h),
                _ => special[rng.gen_range(0..special.len())].min(h),
            })
            .collect();
        let margin = r.run(&v).revenue() - (a.run(&v).revenue() - eps);
        worst = worst.min(margin);
        if margin <= 0.0 {
            failures += 1;
        }
    }
    PerProfileResult {
        checks,
        failures,
        worst_margin: worst,
    }
}
