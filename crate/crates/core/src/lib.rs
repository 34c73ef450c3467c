//! Learning near-optimal truthful auctions from samples.
//!
//! The central objects are Myersonian auctions (monotone stepped virtual
//! valuations), their ε-coarse roundings, and the compact "simple auction"
//! encoding that bounds how many coarse auctions exist. Learning pipelines
//! compose these: estimate an empirical distribution, compute an optimal
//! auction for it, round it to the ε-grid, and emit the rounded auction.

pub mod dist;
pub mod envs;
pub mod error;
pub mod fixtures;
pub mod iid;
pub mod io;
pub mod learn;
pub mod myerson;
pub mod par;
pub mod revenue;
pub mod rounding;
pub mod simple;
pub mod sprounding;
pub mod verify;

pub use error::{Error, Result};
pub use myerson::{Level, Mechanism, Outcome, SingleItemAuction, SteppedVirtualValuation};
