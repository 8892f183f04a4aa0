//! Deviation probing and individual-rationality auditing.
//!
//! A probe pits one buyer's truthful play against a deviation (misreporting,
//! arriving late, or both) on otherwise identical markets, pairing the runs
//! on common random numbers. Small markets are settled by exhaustive
//! enumeration instead of sampling.

use itertools::Itertools;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::curve::DiscountCurve;
use crate::dist::ValuationDistribution;
use crate::market::{AuctionOutcome, BidEvent, BidStream, Decision};
use crate::mech::{self, Mechanism, MechanismConfig, MechanismId, SelectKind, SelectMechanism};
use crate::seeding::{label_hash, mix, rng_for};
use crate::{Error, Result};

/// How the probed buyer deviates from truthful play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationKind {
    /// Report `factor * v * d(t)` instead of the truth.
    ScaleBid { factor: f64 },
    /// Arrive just after the buyer `delta` slots later (re-reporting
    /// truthfully at the new, lower discount). Falling off the horizon means
    /// the buyer never shows up.
    DelaySlots { delta: usize },
    /// Both at once.
    ScaleAndDelay { factor: f64, delta: usize },
}

impl DeviationKind {
    /// The default probe battery: the standard bid scales and short delays.
    pub fn default_set() -> Vec<DeviationKind> {
        vec![
            DeviationKind::ScaleBid { factor: 0.5 },
            DeviationKind::ScaleBid { factor: 0.9 },
            DeviationKind::ScaleBid { factor: 1.1 },
            DeviationKind::ScaleBid { factor: 2.0 },
            DeviationKind::DelaySlots { delta: 1 },
            DeviationKind::DelaySlots { delta: 2 },
        ]
    }

    fn parts(&self) -> (f64, usize) {
        match *self {
            DeviationKind::ScaleBid { factor } => (factor, 0),
            DeviationKind::DelaySlots { delta } => (1.0, delta),
            DeviationKind::ScaleAndDelay { factor, delta } => (factor, delta),
        }
    }
}

/// Smallest slot delay that pushes the target's arrival into a later
/// discount class, if any such delay exists within the horizon.
pub fn class_crossing_delay(
    curve: &DiscountCurve,
    arrivals: &[f64],
    target_slot: usize,
    base: f64,
) -> Option<usize> {
    let t0 = arrivals[target_slot - 1];
    let c0 = crate::classes::class_of_discount(curve.value(t0) / curve.max_value(), base).ok()?;
    for delta in 1..arrivals.len().saturating_sub(target_slot - 1) {
        let idx = target_slot - 1 + delta;
        if idx >= arrivals.len() {
            break;
        }
        let c = crate::classes::class_of_discount(
            curve.value(arrivals[idx]) / curve.max_value(),
            base,
        )
        .ok()?;
        if c > c0 {
            return Some(delta);
        }
    }
    None
}

/// Co-bidder valuations for a probe family.
#[derive(Debug, Clone)]
pub enum CoValues {
    /// Freshly sampled each replication.
    Dist(ValuationDistribution),
    /// A fixed multiset, shuffled over the non-target slots.
    Fixed(Vec<f64>),
}

/// One probe family: a market shape plus the buyer under scrutiny.
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub mechanism: MechanismId,
    pub config: MechanismConfig,
    pub n: usize,
    /// 1-based truthful arrival slot of the probed buyer.
    pub target_slot: usize,
    pub target_value: f64,
    pub co_values: CoValues,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub mechanism: MechanismId,
    pub deviation: DeviationKind,
    pub truthful_mean: f64,
    pub deviant_mean: f64,
    /// Deviant minus truthful expected utility.
    pub gain: f64,
    /// Three standard errors of the paired gain (zero in exact mode).
    pub gain_3se: f64,
    pub exact: bool,
    pub verdict: Verdict,
}

/// Builds the arrival grid and the two streams (truthful, deviant) for one
/// assignment of co-bidders. Returns `(stream, target_pos)` pairs; the
/// deviant stream is `None` when the deviation pushes the buyer off the
/// horizon (they simply never appear).
fn build_streams(
    setup: &ProbeSetup,
    co: &[f64],
    deviation: DeviationKind,
) -> ((BidStream, usize), Option<(BidStream, usize)>) {
    let n = setup.n;
    let curve = &setup.config.curve;
    let lambda = setup.config.lambda;
    let horizon = setup.config.horizon;
    let arrivals = crate::instances::grid_arrivals(n, lambda, horizon);
    let tslot = setup.target_slot;

    let mut values = Vec::with_capacity(n);
    let mut ci = 0;
    for j in 1..=n {
        if j == tslot {
            values.push(setup.target_value);
        } else {
            values.push(co[ci]);
            ci += 1;
        }
    }

    let truthful_events: Vec<BidEvent> = arrivals
        .iter()
        .enumerate()
        .map(|(i, &t)| BidEvent { slot: i + 1, time: t, price: values[i] * curve.value(t) })
        .collect();
    let truthful = BidStream {
        events: truthful_events,
        permutation: (0..n).collect(),
    };

    let (factor, delta) = deviation.parts();
    let deviant = if delta == 0 {
        let mut events = truthful.events.clone();
        events[tslot - 1].price *= factor;
        Some((BidStream { events, permutation: truthful.permutation.clone() }, tslot - 1))
    } else {
        let new_idx = tslot - 1 + delta;
        if new_idx >= n {
            None
        } else {
            let next = arrivals.get(new_idx + 1).copied().unwrap_or(horizon);
            if next - arrivals[new_idx] < 1e-12 {
                None
            } else {
                let new_time = 0.5 * (arrivals[new_idx] + next);
                let mut timed: Vec<(f64, f64)> = Vec::with_capacity(n);
                for (i, &t) in arrivals.iter().enumerate() {
                    if i + 1 != tslot {
                        timed.push((t, values[i] * curve.value(t)));
                    }
                }
                let target_price = factor * setup.target_value * curve.value(new_time);
                timed.push((new_time, target_price));
                timed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let target_pos = timed
                    .iter()
                    .position(|&(t, _)| t == new_time)
                    .expect("target present");
                let events = timed
                    .iter()
                    .enumerate()
                    .map(|(i, &(t, p))| BidEvent { slot: i + 1, time: t, price: p })
                    .collect();
                Some((BidStream { events, permutation: (0..n).collect() }, target_pos))
            }
        }
    };
    ((truthful, tslot - 1), deviant)
}

/// Target utility out of a recorded run: winner surplus at the true value
/// plus any credits paid to the target's slot.
fn target_utility(
    outcome: &AuctionOutcome,
    stream: &BidStream,
    target_pos: usize,
    true_value: f64,
    curve: &DiscountCurve,
) -> f64 {
    let slot = stream.events[target_pos].slot;
    let mut u = 0.0;
    if outcome.winner == Some(slot) {
        let d = curve.value(stream.events[target_pos].time);
        u += true_value * d - outcome.payment;
    }
    for rec in &outcome.transcript {
        if rec.decision == Decision::Credit && rec.slot == slot {
            u -= rec.payment; // credits carry negative payment
        }
    }
    u
}

enum Runner {
    Select(SelectMechanism),
    Boxed(Box<dyn Mechanism>),
}

impl Runner {
    fn build(id: MechanismId, config: &MechanismConfig) -> Result<Self> {
        Ok(match id {
            MechanismId::MR => Runner::Select(SelectMechanism::new(SelectKind::Randomized, config)?),
            MechanismId::M1 => Runner::Select(SelectMechanism::new(SelectKind::FixedFirst, config)?),
            MechanismId::MW => Runner::Select(SelectMechanism::new(SelectKind::Weighted, config)?),
            MechanismId::MMW => {
                Runner::Select(SelectMechanism::new(SelectKind::MostWeighted, config)?)
            }
            other => Runner::Boxed(mech::build(other, config)?),
        })
    }

    fn run_utility(
        &self,
        stream: &BidStream,
        target_pos: usize,
        true_value: f64,
        curve: &DiscountCurve,
        seed: u64,
    ) -> f64 {
        let out = match self {
            Runner::Select(m) => m.run(stream, &mut rng_for(seed), true),
            Runner::Boxed(m) => m.run(stream, &mut rng_for(seed), true),
        };
        target_utility(&out, stream, target_pos, true_value, curve)
    }

    /// Exact expected utility, integrating out mechanism randomness. The
    /// non-select mechanisms are deterministic, so one run suffices.
    fn exact_utility(
        &self,
        stream: &BidStream,
        target_pos: usize,
        true_value: f64,
        curve: &DiscountCurve,
    ) -> f64 {
        match self {
            Runner::Select(m) => m.exact_expected_target_utility(stream, target_pos, true_value),
            Runner::Boxed(m) => {
                let out = m.run(stream, &mut rng_for(0), true);
                target_utility(&out, stream, target_pos, true_value, curve)
            }
        }
    }
}

/// Monte Carlo probe: paired truthful/deviant utilities over co-bidder
/// randomness and mechanism randomness.
pub fn truthfulness_probe(
    setup: &ProbeSetup,
    deviations: &[DeviationKind],
) -> Result<Vec<ProbeVerdict>> {
    let runner = Runner::build(setup.mechanism, &setup.config)?;
    let curve = setup.config.curve.clone();
    let mut out = Vec::new();
    for &dev in deviations {
        let mut gains = Vec::with_capacity(setup.reps);
        let mut truth_sum = 0.0;
        let mut dev_sum = 0.0;
        for rep in 0..setup.reps {
            let mut rng = rng_for(mix(setup.seed, &[label_hash("probe"), rep as u64]));
            let co: Vec<f64> = match &setup.co_values {
                CoValues::Dist(d) => (0..setup.n - 1).map(|_| d.sample(&mut rng)).collect(),
                CoValues::Fixed(vals) => {
                    let mut v = vals.clone();
                    v.shuffle(&mut rng);
                    v.truncate(setup.n - 1);
                    v
                }
            };
            let ((truthful, tpos), deviant) = build_streams(setup, &co, dev);
            let mech_seed = mix(setup.seed, &[label_hash("mech"), rep as u64]);
            let u_t =
                runner.run_utility(&truthful, tpos, setup.target_value, &curve, mech_seed);
            let u_d = match &deviant {
                Some((stream, pos)) => {
                    runner.run_utility(stream, *pos, setup.target_value, &curve, mech_seed)
                }
                None => 0.0,
            };
            truth_sum += u_t;
            dev_sum += u_d;
            gains.push(u_d - u_t);
        }
        let reps = setup.reps as f64;
        let gain = gains.iter().sum::<f64>() / reps;
        let var = gains.iter().map(|g| (g - gain).powi(2)).sum::<f64>() / reps.max(2.0);
        let se3 = 3.0 * (var / reps).sqrt();
        out.push(make_verdict(
            setup.mechanism,
            dev,
            truth_sum / reps,
            dev_sum / reps,
            gain,
            se3,
            false,
        ));
    }
    Ok(out)
}

/// Exhaustive probe for small markets: enumerates every placement of the
/// co-bidders and integrates out mechanism randomness exactly.
pub fn truthfulness_probe_exact(
    setup: &ProbeSetup,
    deviations: &[DeviationKind],
) -> Result<Vec<ProbeVerdict>> {
    if setup.n > 7 {
        return Err(Error::TooLargeForExact { n: setup.n, max: 7 });
    }
    let co_base: Vec<f64> = match &setup.co_values {
        CoValues::Fixed(vals) => vals.clone(),
        CoValues::Dist(_) => {
            return Err(Error::Unsupported(
                "exact probing needs a fixed co-bidder multiset".into(),
            ))
        }
    };
    if co_base.len() != setup.n - 1 {
        return Err(Error::InvalidParameter(format!(
            "need exactly n-1 = {} co-bidders, got {}",
            setup.n - 1,
            co_base.len()
        )));
    }
    let runner = Runner::build(setup.mechanism, &setup.config)?;
    let curve = setup.config.curve.clone();
    let mut out = Vec::new();
    for &dev in deviations {
        let mut truth_total = 0.0;
        let mut dev_total = 0.0;
        let mut count = 0u64;
        for perm in (0..co_base.len()).permutations(co_base.len()) {
            let co: Vec<f64> = perm.iter().map(|&i| co_base[i]).collect();
            let ((truthful, tpos), deviant) = build_streams(setup, &co, dev);
            truth_total += runner.exact_utility(&truthful, tpos, setup.target_value, &curve);
            dev_total += match &deviant {
                Some((stream, pos)) => {
                    runner.exact_utility(stream, *pos, setup.target_value, &curve)
                }
                None => 0.0,
            };
            count += 1;
        }
        let truth = truth_total / count as f64;
        let devu = dev_total / count as f64;
        out.push(make_verdict(setup.mechanism, dev, truth, devu, devu - truth, 0.0, true));
    }
    Ok(out)
}

fn make_verdict(
    mechanism: MechanismId,
    deviation: DeviationKind,
    truthful_mean: f64,
    deviant_mean: f64,
    gain: f64,
    gain_3se: f64,
    exact: bool,
) -> ProbeVerdict {
    let tiny = 1e-9 * truthful_mean.abs().max(1.0);
    let verdict = if exact {
        if gain > tiny {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    } else if gain > gain_3se + tiny {
        Verdict::Fail
    } else if gain > 0.5 * gain_3se + tiny {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    ProbeVerdict { mechanism, deviation, truthful_mean, deviant_mean, gain, gain_3se, exact, verdict }
}

/// One individual-rationality violation found in a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrViolation {
    pub slot: usize,
    pub price: f64,
    pub payment: f64,
}

/// Scans a recorded outcome for accepted buyers charged above their report.
pub fn ir_violations(outcome: &AuctionOutcome) -> Vec<IrViolation> {
    outcome
        .transcript
        .iter()
        .filter(|r| r.decision == Decision::Accept && r.payment > r.price)
        .map(|r| IrViolation { slot: r.slot, price: r.price, payment: r.payment })
        .collect()
}
