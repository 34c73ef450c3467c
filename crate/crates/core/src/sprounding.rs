//! Rounding Myersonian auctions in general single-parameter environments.
//!
//! The randomized procedure draws `E` profiles from `F̂` and `D` rounding
//! rules, and keeps the rule with the best average revenue on the drawn
//! profiles. The derandomized variant takes its random bits from pairs of
//! fresh samples, or falls back to a welfare extractor when the samples
//! are nearly deterministic.

use rand::RngCore;

use crate::dist::{EmpiricalSamples, EpsGrid};
use crate::envs::SpAuction;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rounding::{round_phis, RoundingRule};
use crate::myerson::SteppedVirtualValuation;

/// Whether sample-size requirements are enforced or only recorded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplePolicy {
    #[default]
    Enforce,
    Waive,
}

pub trait BitSource {
    fn next_bit(&mut self) -> Option<bool>;
}

/// Bits from a seeded generator, low bit first within each 64-bit word.
pub struct RngBits<R> {
    rng: R,
    word: u64,
    left: u32,
}

impl<R: RngCore> RngBits<R> {
    pub fn new(rng: R) -> Self {
        RngBits {
            rng,
            word: 0,
            left: 0,
        }
    }
}

impl<R: RngCore> BitSource for RngBits<R> {
    fn next_bit(&mut self) -> Option<bool> {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        Some(b)
    }
}

/// A finite, fixed bit string.
pub struct BitStream {
    bits: Vec<bool>,
    pos: usize,
}

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Self {
        BitStream { bits, pos: 0 }
    }
}

impl BitSource for BitStream {
    fn next_bit(&mut self) -> Option<bool> {
        let b = self.bits.get(self.pos).copied();
        self.pos += 1;
        b
    }
}

fn ceil_log2(m: usize) -> usize {
    (usize::BITS - (m - 1).leading_zeros()) as usize
}

/// Bits consumed by one uniform choice among `m` options: `⌈log₂ m⌉ + 32`
/// bits reduced modulo `m`, which keeps the bias below `2⁻³²`. A choice
/// among one option is free.
pub fn bits_per_choice(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        ceil_log2(m) + 32
    }
}

/// Turns a bit source into uniform choices and counts consumption.
pub struct Chooser<B> {
    src: B,
    consumed: usize,
}

impl<B: BitSource> Chooser<B> {
    pub fn new(src: B) -> Self {
        Chooser { src, consumed: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn choose(&mut self, m: usize) -> Result<usize> {
        let k = bits_per_choice(m);
        let mut x: u128 = 0;
        for _ in 0..k {
            let b = self.src.next_bit().ok_or(Error::BitsExhausted {
                consumed: self.consumed,
            })?;
            x = x << 1 | b as u128;
            self.consumed += 1;
        }
        Ok(if m <= 1 { 0 } else { (x % m as u128) as usize })
    }
}

/// `D = ⌈(9H²/2ε²)·ln(2/δ)⌉` rules and `E = ⌈(9H²/2ε²)·ln(4D/δ)⌉` profiles.
pub fn draw_counts(h: f64, eps: f64, delta: f64) -> Result<(usize, usize)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("δ must be in (0, 1), got {delta}")));
    }
    let c = 9.0 * h * h / (2.0 * eps * eps);
    let d = (c * (2.0 / delta).ln()).ceil();
    let e = (c * (4.0 * d / delta).ln()).ceil();
    Ok((d as usize, e as usize))
}

/// Result of the randomized procedure.
#[derive(Clone, Debug)]
pub struct SpRounding {
    pub auction: SpAuction,
    pub rule: RoundingRule,
    pub chosen: usize,
    pub estimates: Vec<f64>,
    pub d: usize,
    pub e: usize,
    pub bits_used: usize,
}

/// Randomized rounding against the empirical samples (`F̂_i` uniform over
/// each bidder's sample). All randomness is drawn from `chooser`: profiles
/// first, then rules, bidders ascending and intervals ascending.
pub fn randomized_round_sp<B: BitSource>(
    a: &SpAuction,
    fhat: &EmpiricalSamples,
    grid: &EpsGrid,
    delta: f64,
    chooser: &mut Chooser<B>,
    exec: Execution,
) -> Result<SpRounding> {
    let n = a.phis().len();
    if fhat.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: fhat.n(),
        });
    }
    let (d, e) = draw_counts(a.h(), grid.eps(), delta)?;
    let t = fhat.t();

    let mut profiles = Vec::with_capacity(e);
    for _ in 0..e {
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(fhat.column(i)[chooser.choose(t)?]);
        }
        profiles.push(v);
    }

    let members: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..grid.intervals())
                .map(|j| {
                    fhat.column(i)
                        .iter()
                        .copied()
                        .filter(|&v| grid.contains(j, v))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut rules = Vec::with_capacity(d);
    for _ in 0..d {
        let mut reps = Vec::with_capacity(n);
        for cells in &members {
            let mut row = Vec::with_capacity(cells.len());
            for (j, m) in cells.iter().enumerate() {
                row.push(if m.is_empty() {
                    grid.point(j)
                } else {
                    m[chooser.choose(m.len())?]
                });
            }
            reps.push(row);
        }
        rules.push(RoundingRule::new(*grid, reps)?);
    }

    let scored = map_indexed(exec, d, |k| -> Result<(f64, SpAuction)> {
        let rounded = a.with_phis(round_phis(a.phis(), &rules[k])?)?;
        let mut total = 0.0;
        for v in &profiles {
            total += rounded.run_sp(v)?.revenue();
        }
        Ok((total / e as f64, rounded))
    });
    let mut estimates = Vec::with_capacity(d);
    let mut best: Option<(usize, SpAuction)> = None;
    for (k, s) in scored.into_iter().enumerate() {
        let (r, auction) = s?;
        if best.as_ref().is_none_or(|(b, _)| r > estimates[*b]) {
            best = Some((k, auction));
        }
        estimates.push(r);
    }
    let (chosen, auction) = best.expect("D ≥ 1");
    Ok(SpRounding {
        auction,
        rule: rules.swap_remove(chosen),
        chosen,
        estimates,
        d,
        e,
        bits_used: chooser.consumed(),
    })
}

/// Randomized rounding driven by a seeded generator.
pub fn randomized_round_sp_seeded(
    a: &SpAuction,
    fhat: &EmpiricalSamples,
    grid: &EpsGrid,
    delta: f64,
    seed: u64,
    exec: Execution,
) -> Result<SpRounding> {
    let mut chooser = Chooser::new(RngBits::new(crate::dist::seeded_rng(seed)));
    randomized_round_sp(a, fhat, grid, delta, &mut chooser, exec)
}

/// One bit per non-identical pair: at the first differing coordinate, 1 if
/// the first profile is smaller. Identical pairs are skipped.
pub fn extract_bits(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<bool> {
    pairs
        .iter()
        .filter_map(|(a, b)| {
            a.iter()
                .zip(b)
                .find(|(x, y)| x != y)
                .map(|(x, y)| x < y)
        })
        .collect()
}

/// Sample sizes needed by the derandomized procedure.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DerandomizationRequirement {
    /// random bits needed by the randomized run (at confidence δ/2)
    pub bits: u64,
    pub d: u64,
    pub e: u64,
    /// samples for the modal-value argument, `⌈8 ln(n/δ)⌉`
    pub s_v: u64,
    /// `ε / ((n+3)H)`
    pub eta: f64,
    pub s_prime: u64,
    pub s_b: u64,
    /// `max(2 s_b, s_v, t)`
    pub required: u64,
}

pub fn derandomization_requirement(
    n: usize,
    t: usize,
    h: f64,
    grid: &EpsGrid,
    delta: f64,
) -> Result<DerandomizationRequirement> {
    let (d, e) = draw_counts(h, grid.eps(), delta / 2.0)?;
    let per = bits_per_choice(t) as u64;
    let bits = (e as u64 * n as u64 + d as u64 * n as u64 * grid.intervals() as u64) * per;
    let s_v = (8.0 * (n as f64 / delta).ln()).ceil().max(0.0) as u64;
    let nh = (n as f64 + 3.0) * h;
    let eta = grid.eps() / nh;
    let s_prime = if bits == 0 {
        0
    } else {
        (nh * ((4.0 * bits as f64).ln() + (1.0 / delta).ln()) / (2.0 * grid.eps())).ceil() as u64
    };
    let s_b = s_prime.saturating_mul(bits);
    let required = (2 * s_b).max(s_v).max(t as u64);
    Ok(DerandomizationRequirement {
        bits,
        d: d as u64,
        e: e as u64,
        s_v,
        eta,
        s_prime,
        s_b,
        required,
    })
}

#[derive(Clone, Debug)]
pub struct Derandomized {
    pub auction: SpAuction,
    /// 1 when the randomized rounding ran, 0 for the welfare extractor
    pub e_bit: u8,
    pub requirement: DerandomizationRequirement,
    pub differing_pairs: usize,
    pub rounding: Option<SpRounding>,
}

/// The most frequent value, ties to the smallest.
fn modal_value(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_len) = (v[0], 0);
    let mut k = 0;
    while k < v.len() {
        let mut m = k;
        while m < v.len() && v[m] == v[k] {
            m += 1;
        }
        if m - k > best_len {
            best = v[k];
            best_len = m - k;
        }
        k = m;
    }
    best
}

/// Deterministic rounding using `profiles` (fresh draws from the true
/// distribution) as the source of randomness.
pub fn derandomized_round_sp(
    a: &SpAuction,
    fhat: &EmpiricalSamples,
    profiles: &[Vec<f64>],
    grid: &EpsGrid,
    delta: f64,
    policy: SamplePolicy,
    exec: Execution,
) -> Result<Derandomized> {
    let n = a.phis().len();
    if profiles.is_empty() {
        return Err(Error::NoSamples);
    }
    if let Some(p) = profiles.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let req = derandomization_requirement(n, fhat.t(), a.h(), grid, delta)?;
    if policy == SamplePolicy::Enforce && (profiles.len() as u64) < req.required {
        return Err(Error::InsufficientSamples {
            what: "derandomized rounding",
            required: req.required,
            available: profiles.len() as u64,
        });
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = profiles
        .chunks_exact(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let bits = extract_bits(&pairs);
    let differing_pairs = bits.len();

    if (differing_pairs as u64) < req.bits {
        let phis = (0..n)
            .map(|i| {
                let v = modal_value(profiles.iter().map(|p| p[i]));
                SteppedVirtualValuation::single_step(v, v, a.h())
            })
            .collect::<Result<_>>()?;
        return Ok(Derandomized {
            auction: a.with_phis(phis)?,
            e_bit: 0,
            requirement: req,
            differing_pairs,
            rounding: None,
        });
    }
    let mut chooser = Chooser::new(BitStream::new(bits[..req.bits as usize].to_vec()));
    let r = randomized_round_sp(a, fhat, grid, delta / 2.0, &mut chooser, exec)?;
    Ok(Derandomized {
        auction: r.auction.clone(),
        e_bit: 1,
        requirement: req,
        differing_pairs,
        rounding: Some(r),
    })
}
