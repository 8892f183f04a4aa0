//! Reference mechanisms: posted price at half a revenue estimate, the offline
//! second-price baseline as a pseudo-mechanism, and an intentionally broken
//! negative control for the IR auditor.

use rand_chacha::ChaCha8Rng;

use crate::market::{AuctionOutcome, BidStream, Decision, DecisionRecord, Phase};
use crate::mech::{Mechanism, MechanismId};
use crate::oracle;

/// Accepts the first report of at least `Z/2` and charges exactly `Z/2`,
/// where `Z = z_factor * opt1(stream)` models an estimate of the best
/// achievable revenue. With `z_factor = 1` the estimate is exact.
pub struct KnownOptMechanism {
    z_factor: f64,
}

impl KnownOptMechanism {
    pub fn new(z_factor: f64) -> Self {
        KnownOptMechanism { z_factor }
    }

    /// Runs with an explicitly supplied estimate `z`.
    pub fn run_with_estimate(
        stream: &BidStream,
        z: f64,
        record: bool,
    ) -> AuctionOutcome {
        if !(z > 0.0) {
            return AuctionOutcome::no_sale();
        }
        let reserve = z / 2.0;
        let mut transcript = if record { Vec::with_capacity(stream.len()) } else { Vec::new() };
        let mut winner = None;
        let mut payment = 0.0;
        for ev in &stream.events {
            let mut decision = Decision::Reject;
            let mut pay = 0.0;
            let phase = if winner.is_some() { Phase::Closed } else { Phase::Decision };
            if winner.is_none() && ev.price >= reserve {
                decision = Decision::Accept;
                pay = reserve;
                winner = Some(ev.slot);
                payment = pay;
            }
            if record {
                transcript.push(DecisionRecord {
                    slot: ev.slot,
                    time: ev.time,
                    price: ev.price,
                    phase,
                    decision,
                    payment: pay,
                });
            }
        }
        let mut utilities = Vec::new();
        if record {
            utilities = vec![0.0; stream.len()];
            if let Some(w) = winner {
                utilities[w - 1] = stream.events[w - 1].price - payment;
            }
        }
        AuctionOutcome {
            winner,
            payment,
            revenue: if winner.is_some() { payment } else { 0.0 },
            utilities,
            transcript,
            flags: Vec::new(),
        }
    }
}

impl Mechanism for KnownOptMechanism {
    fn id(&self) -> MechanismId {
        MechanismId::MZ
    }

    fn run(&self, stream: &BidStream, _rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome {
        let z = self.z_factor * oracle::opt1(stream);
        Self::run_with_estimate(stream, z, record)
    }
}

/// The offline second-price baseline exposed under the mechanism interface so
/// sweeps can include it (its tested ratio against itself is exactly 1).
pub struct VickreyBaseline;

impl Mechanism for VickreyBaseline {
    fn id(&self) -> MechanismId {
        MechanismId::Vickrey
    }

    fn run(&self, stream: &BidStream, _rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome {
        let mut out = oracle::vickrey_offline(stream);
        if !record {
            out.transcript.clear();
            out.utilities.clear();
        }
        out
    }
}

/// Negative control: accepts the first buyer and overcharges them by one
/// unit. Exists so the IR auditor has something to catch.
pub struct BrokenOvercharge;

impl Mechanism for BrokenOvercharge {
    fn id(&self) -> MechanismId {
        MechanismId::Broken
    }

    fn run(&self, stream: &BidStream, _rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome {
        let Some(first) = stream.events.first() else {
            return AuctionOutcome::no_sale();
        };
        let payment = first.price + 1.0;
        let mut transcript = Vec::new();
        if record {
            transcript = stream
                .events
                .iter()
                .map(|ev| DecisionRecord {
                    slot: ev.slot,
                    time: ev.time,
                    price: ev.price,
                    phase: if ev.slot == first.slot { Phase::Decision } else { Phase::Closed },
                    decision: if ev.slot == first.slot { Decision::Accept } else { Decision::Reject },
                    payment: if ev.slot == first.slot { payment } else { 0.0 },
                })
                .collect();
        }
        let mut utilities = Vec::new();
        if record {
            utilities = vec![0.0; stream.len()];
            utilities[0] = first.price - payment;
        }
        AuctionOutcome {
            winner: Some(first.slot),
            payment,
            revenue: payment,
            utilities,
            transcript,
            flags: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BidEvent;
    use crate::seeding::rng_for;

    fn stream_of(prices: &[f64]) -> BidStream {
        BidStream {
            events: prices
                .iter()
                .enumerate()
                .map(|(i, &p)| BidEvent { slot: i + 1, time: (i + 1) as f64, price: p })
                .collect(),
            permutation: (0..prices.len()).collect(),
        }
    }

    #[test]
    fn known_opt_examples() {
        let out = KnownOptMechanism::run_with_estimate(&stream_of(&[3.0, 6.0, 8.0]), 10.0, true);
        assert_eq!(out.winner, Some(2));
        assert_eq!(out.payment, 5.0);

        let none = KnownOptMechanism::run_with_estimate(&stream_of(&[4.0, 4.0]), 10.0, true);
        assert_eq!(none.winner, None);
        assert_eq!(none.revenue, 0.0);
    }

    #[test]
    fn known_opt_with_exact_estimate_always_sells_at_half() {
        // Z = max report: the maximum itself clears the reserve.
        let mech = KnownOptMechanism::new(1.0);
        let s = stream_of(&[1.0, 9.0, 5.0]);
        let out = mech.run(&s, &mut rng_for(0), false);
        assert_eq!(out.payment, 4.5);
    }

    #[test]
    fn broken_control_violates_ir() {
        let out = BrokenOvercharge.run(&stream_of(&[2.0]), &mut rng_for(0), true);
        assert!(out.payment > 2.0);
        assert!(out.utilities[0] < 0.0);
    }
}
