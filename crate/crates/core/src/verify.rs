//! Property checks on a finished auction: truthfulness against a dense set
//! of deviations, individual rationality, and ε-coarseness.

use std::fmt;

use serde::Serialize;

use crate::dist::{EpsGrid, ProductDistribution};
use crate::error::{Error, Result};
use crate::myerson::{Mechanism, Outcome};
use crate::par::{map_chunks, Execution};

const TOL: f64 = 1e-9;
const MAX_REPORTED: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Truthfulness,
    IndividualRationality,
    Coarseness,
    RunError,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 0-based
    pub bidder: usize,
    pub profile: Vec<f64>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}: bidder {} at profile {:?}: {}",
            self.kind,
            self.bidder + 1,
            self.profile,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub profiles: usize,
    pub runs: u64,
    pub violations: Vec<Violation>,
    pub total_violations: usize,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.total_violations == 0
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// check that outcomes only depend on grid intervals
    pub grid: Option<EpsGrid>,
    /// spacing of the deviation grid; defaults to ε/100 or H/1000
    pub deviation_step: Option<f64>,
    /// maximum number of mechanism runs
    pub budget: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid: None,
            deviation_step: None,
            budget: 50_000_000,
        }
    }
}

fn utility(o: &Outcome, i: usize, v: f64) -> f64 {
    o.alloc[i] * v - o.pay[i]
}

fn same_outcome(a: &Outcome, b: &Outcome) -> bool {
    a.alloc.iter().zip(&b.alloc).all(|(x, y)| (x - y).abs() <= TOL)
        && a.pay.iter().zip(&b.pay).all(|(x, y)| (x - y).abs() <= TOL)
}

/// Check every support profile of `f`.
pub fn verify<M: Mechanism + ?Sized>(
    m: &M,
    f: &ProductDistribution,
    cfg: &VerifyConfig,
    exec: Execution,
) -> Result<VerifyReport> {
    let n = m.n();
    if f.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.n(),
        });
    }
    let h = m.h();
    let step = cfg
        .deviation_step
        .or(cfg.grid.map(|g| g.eps() / 100.0))
        .unwrap_or(h / 1000.0);
    if step.is_nan() || step <= 0.0 {
        return Err(Error::param("deviation step must be positive"));
    }
    let deviations: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let count = (h / step).floor() as usize;
            let mut d: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(h)).collect();
            d.push(h);
            d.extend(f.factor(i).support().iter().copied().filter(|&v| v <= h));
            if let Some(g) = &cfg.grid {
                d.extend((0..g.intervals()).map(|j| g.point(j)).filter(|&x| x <= h));
            }
            d.sort_by(f64::total_cmp);
            d.dedup();
            d
        })
        .collect();
    let per_profile: u64 = 1 + deviations.iter().map(|d| d.len() as u64).sum::<u64>()
        + if cfg.grid.is_some() { 2 * n as u64 } else { 0 };
    let profiles = f.profile_count();
    let runs = (profiles as u64).saturating_mul(per_profile);
    if profiles > u32::MAX as u128 || runs > cfg.budget {
        return Err(Error::InstanceTooLarge {
            size: runs as u128,
            limit: cfg.budget as u128,
        });
    }

    let parts = map_chunks(exec, profiles as usize, 64, |_, range| {
        let mut found: Vec<Violation> = Vec::new();
        let mut count = 0usize;
        let mut v = vec![0.0; n];
        let mut push = |found: &mut Vec<Violation>, viol: Violation| {
            count += 1;
            if found.len() < MAX_REPORTED {
                found.push(viol);
            }
        };
        for idx in range {
            f.profile(idx, &mut v);
            let truth = match m.run(&v) {
                Ok(o) => o,
                Err(e) => {
                    push(&mut found, Violation {
                        kind: ViolationKind::RunError,
                        bidder: 0,
                        profile: v.clone(),
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            for i in 0..n {
                let (x, p) = (truth.alloc[i], truth.pay[i]);
                if p > x * v[i] + TOL || p < -TOL || (x == 0.0 && p.abs() > TOL) {
                    push(&mut found, Violation {
                        kind: ViolationKind::IndividualRationality,
                        bidder: i,
                        profile: v.clone(),
                        detail: format!("allocation {x}, payment {p}"),
                    });
                }
                let u = utility(&truth, i, v[i]);
                let mut probe = v.clone();
                for &d in &deviations[i] {
                    probe[i] = d;
                    match m.run(&probe) {
                        Ok(o) => {
                            let ud = utility(&o, i, v[i]);
                            if ud > u + TOL {
                                push(&mut found, Violation {
                                    kind: ViolationKind::Truthfulness,
                                    bidder: i,
                                    profile: v.clone(),
                                    detail: format!(
                                        "bidding {d} raises utility from {u} to {ud}"
                                    ),
                                });
                                break;
                            }
                        }
                        Err(e) => {
                            push(&mut found, Violation {
                                kind: ViolationKind::RunError,
                                bidder: i,
                                profile: probe.clone(),
                                detail: e.to_string(),
                            });
                            break;
                        }
                    }
                }
                if let Some(g) = &cfg.grid {
                    let j = g.index(v[i]);
                    let lo = g.lower(j);
                    let mid = 0.5 * (lo + g.upper(j).min(h));
                    for r in [lo, mid] {
                        if !g.contains(j, r) || r > h {
                            continue;
                        }
                        probe[i] = r;
                        if let Ok(o) = m.run(&probe) {
                            if !same_outcome(&o, &truth) {
                                push(&mut found, Violation {
                                    kind: ViolationKind::Coarseness,
                                    bidder: i,
                                    profile: v.clone(),
                                    detail: format!("outcome changes when bid moves to {r} in the same interval"),
                                });
                                break;
                            }
                        }
                    }
                }
            }
        }
        (found, count)
    });
    let mut report = VerifyReport {
        profiles: profiles as usize,
        runs,
        ..Default::default()
    };
    for (found, count) in parts {
        report.total_violations += count;
        for viol in found {
            if report.violations.len() < MAX_REPORTED {
                report.violations.push(viol);
            }
        }
    }
    Ok(report)
}
