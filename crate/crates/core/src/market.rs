//! Market instances, bid streams, and auction outcomes.

use serde::{Deserialize, Serialize};

use crate::curve::DiscountCurve;
use crate::{Error, Result};

/// Ground truth for one auction run: who could arrive, when, and how the item
/// discounts over time. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInstance {
    /// Initial valuations, one per buyer (a multiset; order carries no meaning).
    pub valuations: Vec<f64>,
    /// Arrival times, strictly increasing, all within `[0, horizon]`.
    pub arrivals: Vec<f64>,
    pub curve: DiscountCurve,
    /// Buyers per time unit of the arrival process that produced `arrivals`.
    pub lambda: f64,
    /// Selling stops at this time.
    pub horizon: f64,
}

impl MarketInstance {
    pub fn new(
        valuations: Vec<f64>,
        arrivals: Vec<f64>,
        curve: DiscountCurve,
        lambda: f64,
        horizon: f64,
    ) -> Result<Self> {
        let inst = MarketInstance { valuations, arrivals, curve, lambda, horizon };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.valuations.len() != self.arrivals.len() {
            return Err(Error::InvalidInstance(format!(
                "{} valuations vs {} arrivals",
                self.valuations.len(),
                self.arrivals.len()
            )));
        }
        if self.valuations.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInstance("valuations must be finite and >= 0".into()));
        }
        if self.arrivals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInstance("arrival times must be strictly increasing".into()));
        }
        if let (Some(&first), Some(&last)) = (self.arrivals.first(), self.arrivals.last()) {
            if first < 0.0 || last > self.horizon {
                return Err(Error::InvalidInstance("arrivals must lie in [0, horizon]".into()));
            }
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidInstance("lambda must be positive".into()));
        }
        self.curve.validate()?;
        if self.curve.horizon() < self.horizon {
            return Err(Error::InvalidInstance("curve horizon shorter than instance horizon".into()));
        }
        Ok(())
    }

    /// Serializes to the archival JSON document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replays an archived instance, re-validating invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: MarketInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// One arrival as the mechanism sees it. Slots are 1-based arrival ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidEvent {
    pub slot: usize,
    pub time: f64,
    /// Reported price; equals `v * d(time)` under truthful play.
    pub price: f64,
}

/// The online view of a run: ordered events plus the hidden assignment of
/// buyers to slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BidStream {
    pub events: Vec<BidEvent>,
    /// `permutation[j - 1]` is the valuation index of the buyer in slot `j`.
    pub permutation: Vec<usize>,
}

impl BidStream {
    /// Builds the truthful stream for `instance` under the given assignment of
    /// buyers to slots: the slot-`j` buyer reports `v[perm[j-1]] * d(t_j)`.
    pub fn truthful(instance: &MarketInstance, permutation: &[usize]) -> Self {
        debug_assert_eq!(permutation.len(), instance.arrivals.len());
        let events = instance
            .arrivals
            .iter()
            .zip(permutation)
            .enumerate()
            .map(|(i, (&t, &who))| BidEvent {
                slot: i + 1,
                time: t,
                price: instance.valuations[who] * instance.curve.value(t),
            })
            .collect();
        BidStream { events, permutation: permutation.to_vec() }
    }

    /// Truthful stream in arrival order of the valuation list itself.
    pub fn identity(instance: &MarketInstance) -> Self {
        let perm: Vec<usize> = (0..instance.n()).collect();
        Self::truthful(instance, &perm)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Phase labels attached to transcript records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreClass,
    Observation,
    Decision,
    Tail,
    Closed,
    Learning,
    Compensation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
    /// Credit paid out by the seller (learning-phase compensation).
    Credit,
}

/// One irrevocable per-event decision. Serialized as one JSON line each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub slot: usize,
    pub time: f64,
    pub price: f64,
    pub phase: Phase,
    pub decision: Decision,
    pub payment: f64,
}

/// Result of running a mechanism (or the offline baseline) on a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// Winning slot (1-based), if a sale happened.
    pub winner: Option<usize>,
    /// What the winner paid.
    pub payment: f64,
    /// Seller revenue: payment minus any credits paid out.
    pub revenue: f64,
    /// Per-slot utilities (index `j - 1` for slot `j`). Empty in slim runs.
    pub utilities: Vec<f64>,
    /// Per-event decisions in arrival order. Empty in slim runs.
    pub transcript: Vec<DecisionRecord>,
    /// Free-form notes (e.g. fallback paths taken).
    pub flags: Vec<String>,
}

impl AuctionOutcome {
    pub fn no_sale() -> Self {
        AuctionOutcome {
            winner: None,
            payment: 0.0,
            revenue: 0.0,
            utilities: Vec::new(),
            transcript: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// Writes the transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for rec in &self.transcript {
            out.push_str(&serde_json::to_string(rec)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Discounted report `v * d(t)`, the price a truthful buyer submits.
pub fn reported_price(v: f64, t: f64, curve: &DiscountCurve) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::InvalidParameter(format!("valuation {v} must be >= 0")));
    }
    Ok(v * curve.try_value(t)?)
}

/// Buyer utility: `v * d - payment` for the winner, zero otherwise.
pub fn utility(v: f64, discount: f64, payment: f64, won: bool) -> f64 {
    if won {
        v * discount - payment
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_with_half() -> DiscountCurve {
        DiscountCurve::Table { ends: vec![1.0, 2.0], values: vec![0.5, 0.25], horizon: 2.0 }
    }

    #[test]
    fn reported_price_examples() {
        let half = curve_with_half();
        assert_eq!(reported_price(10.0, 0.5, &half).unwrap(), 5.0);
        let d4 = DiscountCurve::d4(2000.0);
        assert_eq!(reported_price(7.0, 0.0, &d4).unwrap(), 7.0);
        let d1 = DiscountCurve::d1(2000.0);
        assert_eq!(reported_price(100.0, 1000.0, &d1).unwrap(), 50.0);
        assert!(reported_price(1.0, -0.1, &d1).is_err());
        assert!(reported_price(1.0, 2000.1, &d1).is_err());
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(10.0, 0.5, 4.0, true), 1.0);
        assert_eq!(utility(10.0, 0.5, 4.0, false), 0.0);
        assert_eq!(utility(8.0, 1.0, 8.0, true), 0.0);
    }

    #[test]
    fn truthful_stream_prices() {
        let inst = MarketInstance::new(
            vec![10.0, 20.0],
            vec![0.5, 1.5],
            curve_with_half(),
            1.0,
            2.0,
        )
        .unwrap();
        let stream = BidStream::truthful(&inst, &[1, 0]);
        assert_eq!(stream.events[0].price, 20.0 * 0.5);
        assert_eq!(stream.events[1].price, 10.0 * 0.25);
        assert_eq!(stream.events[0].slot, 1);
    }

    #[test]
    fn instance_validation() {
        let c = DiscountCurve::d4(10.0);
        assert!(MarketInstance::new(vec![1.0], vec![1.0, 2.0], c.clone(), 1.0, 10.0).is_err());
        assert!(MarketInstance::new(vec![1.0, 2.0], vec![2.0, 2.0], c.clone(), 1.0, 10.0).is_err());
        assert!(MarketInstance::new(vec![1.0, 2.0], vec![2.0, 11.0], c.clone(), 1.0, 10.0).is_err());
        assert!(MarketInstance::new(vec![1.0, -2.0], vec![1.0, 2.0], c.clone(), 1.0, 10.0).is_err());
        assert!(MarketInstance::new(vec![1.0, 2.0], vec![1.0, 2.0], c, 1.0, 10.0).is_ok());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = MarketInstance::new(
            vec![0.1 + 0.2, 65536.0, 1e-9],
            vec![0.123456789, 1.0, 1.5000000001],
            DiscountCurve::d1(2.0),
            1.3,
            2.0,
        )
        .unwrap();
        let text = inst.to_json().unwrap();
        let back = MarketInstance::from_json(&text).unwrap();
        assert_eq!(inst, back);
    }
}
