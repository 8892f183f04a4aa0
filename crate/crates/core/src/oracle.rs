//! Offline oracles: second-price revenue, first-price optimum, and exact
//! permutation expectations for small instances.

use itertools::Itertools;

use crate::market::{
    AuctionOutcome, BidStream, Decision, DecisionRecord, MarketInstance, Phase,
};
use crate::{Error, Result};

/// Largest `n` for which `n!` enumeration is allowed (40320 permutations).
pub const EXACT_ENUM_MAX: usize = 8;

/// Offline second-price auction on a full stream: the highest report wins
/// (earliest slot on ties) and pays the second-highest report.
///
/// A singleton stream sells at price 0; an empty stream is a no-sale.
pub fn vickrey_offline(stream: &BidStream) -> AuctionOutcome {
    if stream.is_empty() {
        return AuctionOutcome::no_sale();
    }
    let mut best = 0usize;
    let mut second = f64::NEG_INFINITY;
    for (i, ev) in stream.events.iter().enumerate() {
        if ev.price > stream.events[best].price {
            second = stream.events[best].price;
            best = i;
        } else if i != best && ev.price > second {
            second = ev.price;
        }
    }
    let payment = if stream.len() == 1 { 0.0 } else { second };
    let winner = stream.events[best].slot;
    let mut utilities = vec![0.0; stream.len()];
    utilities[best] = stream.events[best].price - payment;
    let transcript = stream
        .events
        .iter()
        .map(|ev| DecisionRecord {
            slot: ev.slot,
            time: ev.time,
            price: ev.price,
            phase: Phase::Decision,
            decision: if ev.slot == winner { Decision::Accept } else { Decision::Reject },
            payment: if ev.slot == winner { payment } else { 0.0 },
        })
        .collect();
    AuctionOutcome {
        winner: Some(winner),
        payment,
        revenue: payment,
        utilities,
        transcript,
        flags: Vec::new(),
    }
}

/// Maximum reported price on the stream (0 when empty): the best any
/// first-price selection could earn in hindsight.
pub fn opt1(stream: &BidStream) -> f64 {
    stream.events.iter().map(|e| e.price).fold(0.0, f64::max)
}

/// Second-largest entry of a price vector (0 for fewer than two entries).
fn second_largest(prices: &[f64]) -> f64 {
    if prices.len() < 2 {
        return 0.0;
    }
    let (mut hi, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in prices {
        if p > hi {
            second = hi;
            hi = p;
        } else if p > second {
            second = p;
        }
    }
    second
}

/// Exact expected second-price revenue over all `n!` arrival assignments of
/// the instance's valuations to its (fixed) arrival times.
pub fn exact_expected_vickrey(instance: &MarketInstance) -> Result<f64> {
    let n = instance.n();
    if n > EXACT_ENUM_MAX {
        return Err(Error::TooLargeForExact { n, max: EXACT_ENUM_MAX });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let discounts: Vec<f64> =
        instance.arrivals.iter().map(|&t| instance.curve.value(t)).collect();
    let mut total = 0.0;
    let mut count = 0u64;
    let mut prices = vec![0.0; n];
    for perm in (0..n).permutations(n) {
        for (j, &who) in perm.iter().enumerate() {
            prices[j] = instance.valuations[who] * discounts[j];
        }
        total += second_largest(&prices);
        count += 1;
    }
    Ok(total / count as f64)
}

/// Exact expected revenue of the observe-then-select subroutine restricted to
/// the arrivals in `class_slots` (0-based slot index range), averaged over all
/// `n!` assignments of valuations to arrival times.
///
/// Per assignment, with `x = floor(n_c / 2)` observation arrivals, the
/// observation lottery selects someone (revenue 0) unless all `x` draws miss,
/// which happens with probability `(x/(x+1))^x`; surviving runs earn the
/// observation maximum iff some decision-phase report reaches it. A class of
/// fewer than two arrivals has `x = 0` and earns nothing.
pub fn exact_expected_observe_select(
    instance: &MarketInstance,
    class_slots: std::ops::Range<usize>,
) -> Result<f64> {
    let n = instance.n();
    if n > EXACT_ENUM_MAX {
        return Err(Error::TooLargeForExact { n, max: EXACT_ENUM_MAX });
    }
    if class_slots.end > n {
        return Err(Error::InvalidParameter(format!(
            "class slots {class_slots:?} outside instance of n = {n}"
        )));
    }
    let n_c = class_slots.len();
    let x = n_c / 2;
    if x == 0 {
        return Ok(0.0);
    }
    let survive = (x as f64 / (x as f64 + 1.0)).powi(x as i32);
    let discounts: Vec<f64> =
        instance.arrivals.iter().map(|&t| instance.curve.value(t)).collect();
    let mut total = 0.0;
    let mut count = 0u64;
    for perm in (0..n).permutations(n) {
        let price =
            |j: usize| instance.valuations[perm[j]] * discounts[j];
        let obs_max = class_slots
            .clone()
            .take(x)
            .map(price)
            .fold(f64::NEG_INFINITY, f64::max);
        let hit = class_slots.clone().skip(x).any(|j| price(j) >= obs_max);
        if hit {
            total += survive * obs_max;
        }
        count += 1;
    }
    Ok(total / count as f64)
}
