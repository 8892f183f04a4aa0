//! Simulation lab for single-item online auctions with time-discounted valuations.
//!
//! A seller auctions one item to buyers that arrive over time. Buyer `i` holds a
//! private initial valuation `v_i`; at arrival time `t` the item is worth
//! `v_i * d(t)` to them, where `d` is a known discount curve with values in
//! `(0, 1]`. The seller must accept or reject each bid irrevocably on arrival.
//!
//! The crate provides:
//!
//! * the market model ([`market`]) and offline oracles ([`oracle`]) used as
//!   baselines (second-price revenue, exact permutation expectations),
//! * geometric discount-class machinery ([`classes`]),
//! * the online mechanism zoo ([`mech`]): class-based observe/select mechanisms,
//!   posted-price schedules from backward induction, and simple references,
//! * adversarial instance generators and an adaptive bidding game ([`instances`],
//!   [`game`]),
//! * a Monte Carlo experiment harness with deviation probing and IR auditing
//!   ([`harness`], [`probe`]).
//!
//! All randomness flows through explicitly seeded ChaCha8 generators so that
//! every run is reproducible bit-for-bit across platforms.

pub mod classes;
pub mod curve;
pub mod dist;
pub mod game;
pub mod harness;
pub mod instances;
pub mod market;
pub mod mech;
pub mod oracle;
pub mod probe;
pub mod seeding;

pub use classes::ClassPartition;
pub use curve::DiscountCurve;
pub use dist::ValuationDistribution;
pub use market::{AuctionOutcome, BidEvent, BidStream, MarketInstance};
pub use mech::{Mechanism, MechanismConfig, MechanismId};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside curve domain [0, {horizon}]")]
    TimeOutOfDomain { t: f64, horizon: f64 },
    #[error("discount value {d} outside (0, 1]")]
    DiscountOutOfRange { d: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("exact enumeration requires n <= {max}, got n = {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
