//! Value distributions, the ε-grid, sampling, and sample ingestion.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-9;

/// Round to 12 decimal places so that grid points such as `3 * 0.1` land on
/// the decimal value a user would type.
fn snap(x: f64) -> f64 {
    let scaled = x * 1e12;
    if scaled.abs() < 4e15 {
        scaled.round() / 1e12
    } else {
        x
    }
}

/// The ε-grid on `[0, H]`. Interval `j` is `[jε, (j+1)ε)` for
/// `j ∈ 0..=⌊H/ε⌋`; a value equal to `H` falls in the top interval.
///
/// Grid points are computed once by [`EpsGrid::point`] and every other
/// operation compares against those exact doubles, which keeps interval
/// membership consistent across modules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsGrid {
    eps: f64,
    h: f64,
}

impl EpsGrid {
    pub fn new(eps: f64, h: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::param(format!("ε must be positive, got {eps}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("H must be positive, got {h}")));
        }
        if eps > h {
            return Err(Error::param(format!("ε = {eps} exceeds H = {h}")));
        }
        Ok(EpsGrid { eps, h })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// The grid point `jε`.
    pub fn point(&self, j: usize) -> f64 {
        snap(j as f64 * self.eps)
    }

    /// Index of the interval containing `v` (for `v ≥ 0`).
    pub fn index(&self, v: f64) -> usize {
        let mut j = (v / self.eps).floor().max(0.0) as usize;
        while self.point(j + 1) <= v {
            j += 1;
        }
        while j > 0 && self.point(j) > v {
            j -= 1;
        }
        j
    }

    /// `⌊H/ε⌋`, the index of the top interval.
    pub fn top(&self) -> usize {
        self.index(self.h)
    }

    /// Number of intervals meeting `[0, H]`.
    pub fn intervals(&self) -> usize {
        self.top() + 1
    }

    /// `⌊v⌋_ε`.
    pub fn floor(&self, v: f64) -> f64 {
        self.point(self.index(v))
    }

    /// `⌈v⌉_ε`.
    pub fn ceil(&self, v: f64) -> f64 {
        let j = self.index(v);
        if self.point(j) == v {
            v
        } else {
            self.point(j + 1)
        }
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.point(j)
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.point(j + 1)
    }

    pub fn contains(&self, j: usize, v: f64) -> bool {
        v >= 0.0 && self.index(v) == j
    }
}

/// A finitely supported distribution on `[0, H]`.
///
/// The support is sorted, duplicate-free, and carries only positive mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
    h: f64,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>, h: f64) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: probs.len(),
            });
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("H must be positive, got {h}")));
        }
        let mut pairs = Vec::with_capacity(support.len());
        for (&v, &p) in support.iter().zip(&probs) {
            if !v.is_finite() || v < 0.0 || v > h {
                return Err(Error::OutOfRange { value: v, h });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("bad probability {p}")));
            }
            if p > 0.0 {
                pairs.push((v, p));
            }
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if pairs.is_empty() || (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if support.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(v);
                probs.push(p);
            }
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(DiscreteDistribution { support, probs, h })
    }

    pub fn point_mass(v: f64, h: f64) -> Result<Self> {
        Self::new(vec![v], vec![1.0], h)
    }

    /// Uniform over a multiset of values; repeated values accumulate mass.
    pub fn uniform_over(values: &[f64], h: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NoSamples);
        }
        let p = 1.0 / values.len() as f64;
        Self::new(values.to_vec(), vec![p; values.len()], h)
    }

    /// The empirical distribution of a sample.
    pub fn empirical(samples: &[f64], h: f64) -> Result<Self> {
        Self::uniform_over(samples, h)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// `P(V ≥ x)`.
    pub fn tail(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&v| v < x);
        self.probs[k..].iter().sum()
    }

    /// `P(V ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&v| v <= x);
        self.probs[..k].iter().sum()
    }

    /// Mass on the half-open interval `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.iter()
            .filter(|&(v, _)| v >= lo && v < hi)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, p)| v * p).sum()
    }

    /// `F|_j`: the distribution conditioned on grid interval `j`, or `None`
    /// when the interval carries no mass.
    pub fn conditional_on_interval(&self, grid: &EpsGrid, j: usize) -> Option<Self> {
        let (vs, ps): (Vec<f64>, Vec<f64>) =
            self.iter().filter(|&(v, _)| grid.contains(j, v)).unzip();
        let total: f64 = ps.iter().sum();
        if vs.is_empty() || total <= 0.0 {
            return None;
        }
        let ps = ps.into_iter().map(|p| p / total).collect();
        Some(DiscreteDistribution {
            support: vs,
            probs: ps,
            h: self.h,
        })
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (v, p) in self.iter() {
            acc += p;
            if u < acc {
                return v;
            }
        }
        *self.support.last().unwrap()
    }
}

/// Independent bidder distributions `F = F_1 × … × F_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDistribution {
    factors: Vec<DiscreteDistribution>,
}

impl ProductDistribution {
    pub fn new(factors: Vec<DiscreteDistribution>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::param("product distribution needs at least one bidder"));
        }
        Ok(ProductDistribution { factors })
    }

    /// `F^n` for identical bidders.
    pub fn iid(f: DiscreteDistribution, n: usize) -> Result<Self> {
        Self::new(vec![f; n])
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, i: usize) -> &DiscreteDistribution {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[DiscreteDistribution] {
        &self.factors
    }

    pub fn h(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.h())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of joint support profiles.
    pub fn profile_count(&self) -> u128 {
        self.factors
            .iter()
            .fold(1u128, |acc, f| acc.saturating_mul(f.len() as u128))
    }

    /// Decode a flat profile index (mixed radix, bidder 0 most significant).
    pub fn profile(&self, mut index: usize, values: &mut [f64]) -> f64 {
        let mut prob = 1.0;
        for (i, f) in self.factors.iter().enumerate().rev() {
            let k = index % f.len();
            index /= f.len();
            values[i] = f.support()[k];
            prob *= f.probs()[k];
        }
        prob
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factors.iter().map(|f| f.sample(rng)).collect()
    }
}

/// A source of values, discrete or continuous, used for Monte Carlo and
/// for generating synthetic samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleSource {
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
    /// Density `2(x − a)/ε²` on `[a, a + ε]` with `a = ⌊1⌋_ε − ε`.
    Triangle { eps: f64 },
}

impl SampleSource {
    pub fn validate(&self, h: f64) -> Result<()> {
        match self {
            SampleSource::Discrete { support, probs } => {
                DiscreteDistribution::new(support.clone(), probs.clone(), h).map(|_| ())
            }
            &SampleSource::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= h) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform bounds [{lo}, {hi}] not inside [0, {h}]"
                    )));
                }
                Ok(())
            }
            &SampleSource::Triangle { eps } => {
                if !(eps > 0.0 && eps < 1.0) || h < 1.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "triangle needs 0 < ε < 1 ≤ H, got ε = {eps}, H = {h}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The discrete distribution, if this source is discrete.
    pub fn as_discrete(&self, h: f64) -> Option<Result<DiscreteDistribution>> {
        match self {
            SampleSource::Discrete { support, probs } => {
                Some(DiscreteDistribution::new(support.clone(), probs.clone(), h))
            }
            _ => None,
        }
    }

    pub fn triangle_base(eps: f64) -> f64 {
        let grid = EpsGrid::new(eps, 1.0).expect("triangle ε in (0, 1)");
        grid.floor(1.0) - eps
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SampleSource::Discrete { support, probs } => {
                let u: f64 = rng.gen();
                let total: f64 = probs.iter().sum();
                let mut acc = 0.0;
                for (&v, &p) in support.iter().zip(probs) {
                    acc += p / total;
                    if u < acc {
                        return v;
                    }
                }
                *support.last().unwrap()
            }
            &SampleSource::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            &SampleSource::Triangle { eps } => {
                let a = Self::triangle_base(eps);
                a + eps * rng.gen::<f64>().sqrt()
            }
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `count` independent values from `source`.
pub fn draw(source: &SampleSource, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..count).map(|_| source.sample(&mut rng)).collect()
}

/// Per-bidder sample columns, all of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSamples {
    columns: Vec<Vec<f64>>,
    h: f64,
}

impl EmpiricalSamples {
    pub fn new(columns: Vec<Vec<f64>>, h: f64) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::param("need at least one bidder"));
        }
        let t = columns[0].len();
        if t == 0 {
            return Err(Error::NoSamples);
        }
        for c in &columns {
            if c.len() != t {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    got: c.len(),
                });
            }
            for &v in c {
                if !v.is_finite() || v < 0.0 || v > h {
                    return Err(Error::OutOfRange { value: v, h });
                }
            }
        }
        Ok(EmpiricalSamples { columns, h })
    }

    /// Draw `t` samples per bidder from independent sources.
    pub fn draw(sources: &[SampleSource], t: usize, h: f64, seed: u64) -> Result<Self> {
        let columns = sources
            .iter()
            .enumerate()
            .map(|(i, s)| draw(s, t, derive_seed(seed, i as u64)))
            .collect();
        Self::new(columns, h)
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn t(&self) -> usize {
        self.columns[0].len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// The sample as rows (profiles).
    pub fn profiles(&self) -> Vec<Vec<f64>> {
        (0..self.t())
            .map(|r| self.columns.iter().map(|c| c[r]).collect())
            .collect()
    }

    /// The first `t` samples of each bidder.
    pub fn prefix(&self, t: usize) -> Self {
        EmpiricalSamples {
            columns: self
                .columns
                .iter()
                .map(|c| c[..t.min(c.len())].to_vec())
                .collect(),
            h: self.h,
        }
    }

    /// `F̂ = F̂_1 × … × F̂_n`.
    pub fn product(&self) -> Result<ProductDistribution> {
        ProductDistribution::new(
            self.columns
                .iter()
                .map(|c| DiscreteDistribution::empirical(c, self.h))
                .collect::<Result<_>>()?,
        )
    }

    /// All values pooled into one sample (for identical bidders).
    pub fn pooled(&self) -> Vec<f64> {
        self.columns.iter().flatten().copied().collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=self.n()).map(|i| format!("bidder_{i}")).collect();
        w.write_record(&header).map_err(csv_err)?;
        for row in self.profiles() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        row: e.position().map_or(0, |p| p.line() as usize),
        column: 0,
        msg: e.to_string(),
    }
}

/// Read a sample table with header `bidder_1,…,bidder_n`.
pub fn read_samples_csv<R: Read>(reader: R, h: f64) -> Result<EmpiricalSamples> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() {
        return Err(Error::Csv {
            row: 0,
            column: 0,
            msg: "empty header".into(),
        });
    }
    for (k, name) in headers.iter().enumerate() {
        if name != format!("bidder_{}", k + 1) {
            return Err(Error::Csv {
                row: 0,
                column: k + 1,
                msg: format!("expected header bidder_{}, found {name:?}", k + 1),
            });
        }
    }
    let n = headers.len();
    let mut columns = vec![Vec::new(); n];
    // rows are file lines, the header being row 1
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            msg: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n {
            return Err(Error::Csv {
                row,
                column: rec.len().min(n) + 1,
                msg: format!("expected {n} fields, found {}", rec.len()),
            });
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row,
                column: k + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() || v < 0.0 || v > h {
                return Err(Error::Csv {
                    row,
                    column: k + 1,
                    msg: format!("value {v} outside [0, {h}]"),
                });
            }
            columns[k].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::NoSamples);
    }
    EmpiricalSamples::new(columns, h)
}
