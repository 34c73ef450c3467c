//! Sample-size formulas and the end-to-end learning pipelines.

use serde::{Deserialize, Serialize};

use crate::dist::{EmpiricalSamples, EpsGrid, ProductDistribution, SampleSource};
use crate::envs::{Environment, Maximizer, SpAuction};
use crate::error::{Error, Result};
use crate::myerson::{ironed_virtual_valuation, Mechanism, SingleItemAuction};
use crate::par::Execution;
use crate::revenue::{brute_force_revenue, exact_revenue_single_item, monte_carlo_revenue, PROFILE_LIMIT};
use crate::rounding::greedy_round;
use crate::simple::{class_size_log_bound, ln_factorial, SimpleAuctionSequence};
use crate::sprounding::{derandomized_round_sp, DerandomizationRequirement};

pub use crate::sprounding::SamplePolicy;

const MC_TRIALS: usize = 100_000;

fn check_params(h: f64, eps: f64, delta: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param(format!("H must be positive, got {h}")));
    }
    if !(eps > 0.0 && eps <= h) {
        return Err(Error::param(format!("ε must be in (0, H], got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("δ must be in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Smallest `t` from which `t^{n-1}·2·exp(−2tε²/H²) ≤ δ` holds for good,
/// with `δ` given as `ln δ`.
pub fn sample_size_single_item_ln(h: f64, n: usize, eps: f64, ln_delta: f64) -> u64 {
    let c = 2.0 * eps * eps / (h * h);
    let g = |t: u64| (n as f64 - 1.0) * (t as f64).ln() + std::f64::consts::LN_2 - c * t as f64;
    let ok = |t: u64| g(t) <= ln_delta;
    // g rises until t* = (n−1)/c and falls afterwards
    let peak = (n as f64 - 1.0) / c;
    let lo = (peak.ceil() as u64).max(1);
    if ok(lo) && ok((peak.floor() as u64).max(1)) {
        return 1;
    }
    if ok(lo) {
        return lo;
    }
    let mut hi = lo.max(1) * 2;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = lo;
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

/// Samples per bidder so that one fixed single-item auction's empirical
/// revenue is within `ε` of its true revenue with probability `1 − δ`.
pub fn sample_size_single_item(h: f64, n: usize, eps: f64, delta: f64) -> Result<u64> {
    check_params(h, eps, delta)?;
    Ok(sample_size_single_item_ln(h, n, eps, delta.ln()))
}

/// `ln(δ / (|S| + 1))` for a class with `ln |S| = log_size`.
fn union_ln_delta(delta: f64, log_size: f64) -> f64 {
    delta.ln() - (log_size + (-log_size).exp().ln_1p())
}

/// Samples so that every ε-coarse single-item auction (and the optimum) is
/// simultaneously estimated within `ε`.
pub fn uniform_sample_size_single_item(h: f64, n: usize, eps: f64, delta: f64) -> Result<u64> {
    check_params(h, eps, delta)?;
    let grid = EpsGrid::new(eps, h)?;
    Ok(sample_size_single_item_ln(
        h,
        n,
        eps,
        union_ln_delta(delta, class_size_log_bound(n, &grid)),
    ))
}

/// `ln` of a bound on the number of ε-coarse Myersonian auctions in a
/// single-parameter environment: `M · ln(2·(M!)² + 1)`, plus `ln M!` for
/// the order of density quotients used by the approximate maximizer.
pub fn sp_class_log_bound(n: usize, grid: &EpsGrid, maximizer: Maximizer) -> f64 {
    let m = n * grid.intervals();
    let lf = ln_factorial(m);
    let x = std::f64::consts::LN_2 + 2.0 * lf;
    let per = x + (-x).exp().ln_1p();
    let base = m as f64 * per;
    match maximizer {
        Maximizer::Exact => base,
        Maximizer::Approx => base + lf,
    }
}

pub fn uniform_sample_size_sp(
    h: f64,
    n: usize,
    eps: f64,
    delta: f64,
    maximizer: Maximizer,
) -> Result<u64> {
    check_params(h, eps, delta)?;
    let grid = EpsGrid::new(eps, h)?;
    Ok(sample_size_single_item_ln(
        h,
        n,
        eps,
        union_ln_delta(delta, sp_class_log_bound(n, &grid, maximizer)),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueEntry {
    pub label: String,
    pub value: f64,
    /// "exact" or "monte-carlo"
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
}

/// Everything a learning run decided, in a serializable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub pipeline: String,
    pub version: String,
    pub n: usize,
    pub h: f64,
    pub eps: f64,
    pub delta: f64,
    pub grid_step: f64,
    pub samples_available: u64,
    pub t_required: u64,
    pub t_used: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s_required: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub derandomization: Option<DerandomizationRequirement>,
    pub requirement_waived: bool,
    pub caveats: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_bit: Option<u8>,
    pub revenues: Vec<RevenueEntry>,
    /// The learned auction in its text format.
    pub auction: String,
}

impl LearnReport {
    pub fn revenue(&self, label: &str) -> Option<f64> {
        self.revenues.iter().find(|r| r.label == label).map(|r| r.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

fn exact_entry(label: &str, value: f64) -> RevenueEntry {
    RevenueEntry {
        label: label.into(),
        value,
        mode: "exact".into(),
        std_error: None,
    }
}

/// Exact expected revenue when the support is small enough, otherwise a
/// seeded Monte Carlo estimate.
pub fn revenue_entry<M: Mechanism + ?Sized>(
    label: &str,
    m: &M,
    f: &ProductDistribution,
    seed: u64,
    exec: Execution,
) -> Result<RevenueEntry> {
    if f.profile_count() <= PROFILE_LIMIT {
        return Ok(exact_entry(label, brute_force_revenue(m, f, exec)?));
    }
    let sources: Vec<SampleSource> = f
        .factors()
        .iter()
        .map(|d| SampleSource::Discrete {
            support: d.support().to_vec(),
            probs: d.probs().to_vec(),
        })
        .collect();
    let est = monte_carlo_revenue(m, &sources, MC_TRIALS, seed, exec)?;
    Ok(RevenueEntry {
        label: label.into(),
        value: est.mean,
        mode: "monte-carlo".into(),
        std_error: Some(est.std_error),
    })
}

fn check_samples(required: u64, available: u64, policy: SamplePolicy, what: &'static str) -> Result<bool> {
    if available >= required {
        return Ok(false);
    }
    match policy {
        SamplePolicy::Enforce => Err(Error::InsufficientSamples {
            what,
            required,
            available,
        }),
        SamplePolicy::Waive => Ok(true),
    }
}

fn waived_caveat(what: &str, required: u64, available: u64) -> String {
    format!("{what}: guarantee needs {required} samples per bidder, only {available} used")
}

pub struct LearnedSingleItem {
    pub sequence: SimpleAuctionSequence,
    pub rounded: SingleItemAuction,
    pub optimal: SingleItemAuction,
    pub report: LearnReport,
}

/// Learn an ε-optimal single-item auction: empirical distribution, optimal
/// auction for it, greedy rounding at `ε/(n+2)`, simple encoding.
pub fn learn_single_item(
    samples: &EmpiricalSamples,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    exec: Execution,
) -> Result<LearnedSingleItem> {
    let (n, h) = (samples.n(), samples.h());
    check_params(h, eps, delta)?;
    let step = eps / (n as f64 + 2.0);
    let grid = EpsGrid::new(step, h)?;
    let t_required = uniform_sample_size_single_item(h, n, step, delta)?;
    let available = samples.t() as u64;
    let waived = check_samples(t_required, available, policy, "single-item learning")?;

    let fhat = samples.product()?;
    let optimal = SingleItemAuction::optimal(&fhat);
    let rounded = greedy_round(&optimal, &fhat, &grid, exec)?;
    let sequence = SimpleAuctionSequence::encode(&rounded, &grid)?;
    let decoded = sequence.to_single_item()?;

    let revenues = vec![
        exact_entry("optimal_empirical", exact_revenue_single_item(&optimal, &fhat)?),
        exact_entry("rounded_empirical", exact_revenue_single_item(&rounded, &fhat)?),
        exact_entry("learned_empirical", exact_revenue_single_item(&decoded, &fhat)?),
    ];
    let mut caveats = Vec::new();
    if waived {
        caveats.push(waived_caveat("uniform convergence", t_required, available));
    }
    let report = LearnReport {
        pipeline: "single-item".into(),
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
        auction: sequence.to_text(),
    };
    Ok(LearnedSingleItem {
        sequence,
        rounded,
        optimal,
        report,
    })
}

pub struct LearnedSp {
    pub auction: SpAuction,
    pub optimal: SpAuction,
    pub report: LearnReport,
}

#[allow(clippy::too_many_arguments)]
fn learn_sp_inner(
    samples: &EmpiricalSamples,
    env: &Environment,
    maximizer: Maximizer,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    seed: u64,
    exec: Execution,
) -> Result<LearnedSp> {
    env.validate()?;
    let (n, h) = (samples.n(), samples.h());
    if env.n() != n {
        return Err(Error::DimensionMismatch {
            expected: env.n(),
            got: n,
        });
    }
    check_params(h, eps, delta)?;
    let w = env.w_max();
    let step = eps / (w + 3.0);
    let grid = EpsGrid::new(step, h)?;
    let t_required = uniform_sample_size_sp(h, n, step, delta / 2.0, maximizer)?;
    let available = samples.t() as u64;
    let t_used = t_required.min(available);
    let fhat_samples = samples.prefix(t_used as usize);
    let fhat = fhat_samples.product()?;
    let phis = fhat.factors().iter().map(ironed_virtual_valuation).collect();
    let optimal = SpAuction::new(phis, env.clone(), maximizer)?;

    let req = crate::sprounding::derandomization_requirement(n, t_used as usize, h, &grid, delta / 2.0)?;
    let s_required = req.required.max(t_required);
    let waived = check_samples(s_required, available, policy, "single-parameter learning")?;
    let profiles = samples.profiles();
    let der = derandomized_round_sp(
        &optimal,
        &fhat_samples,
        &profiles,
        &grid,
        delta / 2.0,
        SamplePolicy::Waive,
        exec,
    )?;

    let mut caveats = Vec::new();
    if waived {
        caveats.push(waived_caveat("derandomized rounding", s_required, available));
    }
    if der.e_bit == 0 {
        caveats.push(format!(
            "only {} of {} required differing sample pairs; used the welfare extractor",
            der.differing_pairs, der.requirement.bits
        ));
    }
    let revenues = vec![
        revenue_entry("optimal_empirical", &optimal, &fhat, seed, exec)?,
        revenue_entry("learned_empirical", &der.auction, &fhat, seed, exec)?,
    ];
    let report = LearnReport {
        pipeline: match maximizer {
            Maximizer::Exact => "single-parameter",
            Maximizer::Approx => "approx-single-parameter",
        }
        .into(),
        version: env!("CARGO_PKG_VERSION").into(),
        n,
        h,
        eps,
        delta,
        grid_step: step,
        samples_available: available,
        t_required,
        t_used,
        s_required: Some(s_required),
        derandomization: Some(der.requirement.clone()),
        requirement_waived: waived,
        caveats,
        e_bit: Some(der.e_bit),
        revenues,
        auction: crate::io::sp_auction_to_toml(&der.auction),
    };
    Ok(LearnedSp {
        auction: der.auction,
        optimal,
        report,
    })
}

/// Learn in a single-parameter environment with exact welfare maximization.
pub fn learn_single_parameter(
    samples: &EmpiricalSamples,
    env: &Environment,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    seed: u64,
    exec: Execution,
) -> Result<LearnedSp> {
    learn_sp_inner(samples, env, Maximizer::Exact, eps, delta, policy, seed, exec)
}

/// Learn for knapsack with the monotone 2-approximate maximizer.
pub fn learn_approx_single_parameter(
    samples: &EmpiricalSamples,
    env: &Environment,
    eps: f64,
    delta: f64,
    policy: SamplePolicy,
    seed: u64,
    exec: Execution,
) -> Result<LearnedSp> {
    if !matches!(env, Environment::Knapsack { .. }) {
        return Err(Error::param("approximate learning is defined for knapsack only"));
    }
    learn_sp_inner(samples, env, Maximizer::Approx, eps, delta, policy, seed, exec)
}
