//! Text formats for auctions and distribution specs.
//!
//! * simple sequences: header `n H eps`, then `i j` lines
//! * reserve-plus-ironing auctions: `reserve-ironed n H`, `p x`, `[l h)` lines
//! * Myersonian and single-parameter auctions: TOML with one `[[bidder]]`
//!   table per virtual valuation
//!
//! Numbers are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDistribution, ProductDistribution, SampleSource};
use crate::envs::{Environment, Maximizer, SpAuction};
use crate::error::{Error, Result};
use crate::iid::ReserveIronedAuction;
use crate::myerson::{Level, Mechanism, Outcome, PaymentRule, SingleItemAuction, SteppedVirtualValuation};
use crate::simple::SimpleAuctionSequence;

const BELOW_ALL: &str = "below-all";

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LevelDoc {
    Num(f64),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
struct PhiDoc {
    breakpoints: Vec<f64>,
    levels: Vec<LevelDoc>,
}

#[derive(Serialize, Deserialize)]
struct AuctionDoc {
    kind: String,
    h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payment: Option<PaymentRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maximizer: Option<Maximizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env: Option<Environment>,
    bidder: Vec<PhiDoc>,
}

fn phi_doc(phi: &SteppedVirtualValuation) -> PhiDoc {
    PhiDoc {
        breakpoints: phi.breakpoints().to_vec(),
        levels: phi
            .levels()
            .iter()
            .map(|l| match l {
                Level::BelowAll => LevelDoc::Tag(BELOW_ALL.into()),
                Level::Finite(x) => LevelDoc::Num(*x),
            })
            .collect(),
    }
}

fn phi_from_doc(doc: PhiDoc, h: f64) -> Result<SteppedVirtualValuation> {
    let levels = doc
        .levels
        .into_iter()
        .map(|l| match l {
            LevelDoc::Num(x) => Ok(Level::Finite(x)),
            LevelDoc::Tag(t) if t == BELOW_ALL => Ok(Level::BelowAll),
            LevelDoc::Tag(t) => Err(Error::Parse {
                line: 0,
                msg: format!("unknown level {t:?}"),
            }),
        })
        .collect::<Result<_>>()?;
    SteppedVirtualValuation::new(doc.breakpoints, levels, h)
}

fn to_toml(doc: &AuctionDoc) -> String {
    toml::to_string(doc).expect("auction document serializes")
}

pub fn myersonian_to_toml(a: &SingleItemAuction) -> String {
    to_toml(&AuctionDoc {
        kind: "myersonian".into(),
        h: a.h(),
        payment: Some(a.payment_rule()),
        maximizer: None,
        env: None,
        bidder: a.phis().iter().map(phi_doc).collect(),
    })
}

pub fn sp_auction_to_toml(a: &SpAuction) -> String {
    to_toml(&AuctionDoc {
        kind: "single-parameter".into(),
        h: a.h(),
        payment: None,
        maximizer: Some(a.maximizer()),
        env: Some(a.env().clone()),
        bidder: a.phis().iter().map(phi_doc).collect(),
    })
}

fn toml_err(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |r| text[..r.start].matches('\n').count() + 1);
    Error::Parse {
        line,
        msg: e.message().to_string(),
    }
}

/// Any auction the command line can load.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyAuction {
    Simple(SimpleAuctionSequence),
    Myersonian(SingleItemAuction),
    SingleParameter(SpAuction),
    ReserveIroned(ReserveIronedAuction),
}

impl AnyAuction {
    pub fn parse(text: &str) -> Result<Self> {
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or(Error::Parse {
                line: 1,
                msg: "empty auction file".into(),
            })?;
        if first.contains('=') {
            return Self::parse_toml(text);
        }
        if first.starts_with("reserve-ironed") {
            return ReserveIronedAuction::from_text(text).map(AnyAuction::ReserveIroned);
        }
        SimpleAuctionSequence::from_text(text).map(AnyAuction::Simple)
    }

    fn parse_toml(text: &str) -> Result<Self> {
        let doc: AuctionDoc = toml::from_str(text).map_err(|e| toml_err(text, e))?;
        let h = doc.h;
        let phis = doc
            .bidder
            .into_iter()
            .map(|p| phi_from_doc(p, h))
            .collect::<Result<Vec<_>>>()?;
        match doc.kind.as_str() {
            "myersonian" => Ok(AnyAuction::Myersonian(
                SingleItemAuction::new(phis)?.with_payment_rule(doc.payment.unwrap_or_default()),
            )),
            "single-parameter" => {
                let env = doc.env.ok_or(Error::Parse {
                    line: 0,
                    msg: "single-parameter auction needs an [env] table".into(),
                })?;
                Ok(AnyAuction::SingleParameter(SpAuction::new(
                    phis,
                    env,
                    doc.maximizer.unwrap_or_default(),
                )?))
            }
            other => Err(Error::Parse {
                line: 0,
                msg: format!("unknown auction kind {other:?}"),
            }),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            AnyAuction::Simple(s) => s.to_text(),
            AnyAuction::Myersonian(a) => myersonian_to_toml(a),
            AnyAuction::SingleParameter(a) => sp_auction_to_toml(a),
            AnyAuction::ReserveIroned(a) => a.to_text(),
        }
    }

    pub fn as_mechanism(&self) -> &dyn Mechanism {
        match self {
            AnyAuction::Simple(s) => s,
            AnyAuction::Myersonian(a) => a,
            AnyAuction::SingleParameter(a) => a,
            AnyAuction::ReserveIroned(a) => a,
        }
    }
}

impl Mechanism for AnyAuction {
    fn n(&self) -> usize {
        self.as_mechanism().n()
    }

    fn h(&self) -> f64 {
        self.as_mechanism().h()
    }

    fn run(&self, bids: &[f64]) -> Result<Outcome> {
        self.as_mechanism().run(bids)
    }
}

/// A distribution spec file: `h`, optional `n` to replicate a single
/// bidder, and one `[[bidder]]` table per source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub bidder: Vec<SampleSource>,
}

impl DistSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: DistSpec = toml::from_str(text).map_err(|e| toml_err(text, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.bidder.is_empty() {
            return Err(Error::param("distribution spec lists no bidders"));
        }
        if self.n.is_some() && self.bidder.len() != 1 {
            return Err(Error::param("`n` replicates exactly one [[bidder]] table"));
        }
        for s in &self.bidder {
            s.validate(self.h)?;
        }
        Ok(())
    }

    pub fn sources(&self) -> Vec<SampleSource> {
        match self.n {
            Some(n) => vec![self.bidder[0].clone(); n],
            None => self.bidder.clone(),
        }
    }

    /// The product distribution, if every source is discrete.
    pub fn product(&self) -> Option<Result<ProductDistribution>> {
        let mut factors: Vec<DiscreteDistribution> = Vec::new();
        for s in self.sources() {
            match s.as_discrete(self.h)? {
                Ok(d) => factors.push(d),
                Err(e) => return Some(Err(e)),
            }
        }
        Some(ProductDistribution::new(factors))
    }
}
