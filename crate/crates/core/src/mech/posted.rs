//! Posted-price mechanisms planned against a known valuation distribution:
//! a fixed reservation price, backward-induction dynamic prices, the
//! delay-proof payment variant, and a learning-phase wrapper.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::DiscountCurve;
use crate::dist::ValuationDistribution;
use crate::market::{AuctionOutcome, BidStream, Decision, DecisionRecord, Phase};
use crate::mech::{Mechanism, MechanismConfig, MechanismId};
use crate::{Error, Result};

/// Per-slot thresholds and payments over the expected arrival grid
/// `t_j = j / lambda`, plus the backward revenue ladders.
///
/// Thresholds and payments are in valuation units: the `j`-th buyer is
/// accepted when their report exceeds `thresholds[j-1] * discounts[j-1]`.
/// `ladder[m-1]` is the expected revenue with `m` buyers left; `ladder_semi`
/// is the same under the delay-proof payments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationSchedule {
    pub times: Vec<f64>,
    pub discounts: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub payments: Vec<f64>,
    pub ladder: Vec<f64>,
    pub ladder_semi: Vec<f64>,
}

impl ReservationSchedule {
    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// CSV export: `j,t,d,x,rho,r_ladder,r_semi_ladder`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,t,d,x,rho,r_ladder,r_semi_ladder\n");
        let n = self.n();
        for j in 1..=n {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                j,
                self.times[j - 1],
                self.discounts[j - 1],
                self.thresholds[j - 1],
                self.payments[j - 1],
                self.ladder[n - j],
                self.ladder_semi[n - j],
            ));
        }
        out
    }
}

/// Golden-section maximization of `f` on `[lo, hi]` after a coarse scan.
fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let scan = 64usize;
    let mut best_i = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=scan {
        let x = lo + (hi - lo) * (i as f64) / (scan as f64);
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = (hi - lo) / (scan as f64);
    let mut a = lo + step * (best_i.saturating_sub(1)) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-6 * (1.0 + b.abs()) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Expected revenue of a fixed reservation price `x` against the grid: the
/// sale happens unless every buyer's report stays below `x`.
///
/// `monotone` marks a non-increasing grid, where factors of exactly 1 can
/// only be followed by more of the same. Both early exits are exact in f64:
/// once the product drops below 1e-18, `1 - p` is 1 to full precision.
fn fixed_price_revenue(
    dist: &ValuationDistribution,
    discounts: &[f64],
    x: f64,
    monotone: bool,
) -> f64 {
    let mut p_none = 1.0;
    for &d in discounts {
        let f = dist.cdf(x / d);
        if f == 1.0 {
            if monotone {
                break;
            }
            continue;
        }
        p_none *= f;
        if p_none < 1e-18 {
            return x;
        }
    }
    (1.0 - p_none) * x
}

/// Optimal fixed reservation price over the candidate set `{d_j}` plus a
/// 10^4-point refinement grid. Returns `(price, expected_revenue)`.
pub fn fixed_reservation_price(
    dist: &ValuationDistribution,
    discounts: &[f64],
) -> Result<(f64, f64)> {
    if discounts.is_empty() {
        return Err(Error::InvalidParameter("fixed price needs a non-empty grid".into()));
    }
    let monotone = discounts.windows(2).all(|w| w[0] >= w[1]);
    let (lo, hi) = dist.support();
    if !(hi > lo) {
        // Point mass: undercut it by one ulp so the sale always clears.
        let x = if hi > 0.0 { hi * (1.0 - f64::EPSILON) } else { 0.0 };
        return Ok((x, fixed_price_revenue(dist, discounts, x, monotone)));
    }
    let d_max = discounts.iter().cloned().fold(0.0, f64::max);
    let top = hi * d_max;
    let grid = 10_000;
    let mut candidates: Vec<f64> = discounts.to_vec();
    candidates.extend((1..=grid).map(|i| top * (i as f64) / (grid as f64)));
    // Parallel scan; the reduction keeps the earliest candidate on ties so
    // the result does not depend on chunking.
    use rayon::prelude::*;
    let best = candidates
        .par_iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, &x)| (i, x, fixed_price_revenue(dist, discounts, x, monotone)))
        .reduce(
            || (usize::MAX, 0.0, f64::NEG_INFINITY),
            |a, b| {
                if b.2 > a.2 || (b.2 == a.2 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok((best.1, best.2))
}

/// Whether the closed-form backward recursion applies (uniform from zero).
fn uniform_hi(dist: &ValuationDistribution) -> Option<f64> {
    match dist {
        ValuationDistribution::Uniform { lo, hi } if *lo == 0.0 && *hi > 0.0 => Some(*hi),
        _ => None,
    }
}

/// Backward-induction reservation schedule. With `m` buyers left and next
/// discount `d`, the threshold maximizes
/// `(1 - F(x)) * x * d + F(x) * R_{m-1}`; uniform-from-zero distributions use
/// the closed form, everything else is maximized numerically.
pub fn dynamic_reservation_schedule(
    dist: &ValuationDistribution,
    curve: &DiscountCurve,
    lambda: f64,
    n: usize,
) -> Result<ReservationSchedule> {
    let times: Vec<f64> =
        (1..=n).map(|j| (j as f64 / lambda).min(curve.horizon())).collect();
    let discounts: Vec<f64> = times.iter().map(|&t| curve.value(t)).collect();
    dynamic_schedule_for_grid(dist, times, discounts)
}

/// Same, over an explicit `(t_j, d_j)` grid.
pub fn dynamic_schedule_for_grid(
    dist: &ValuationDistribution,
    times: Vec<f64>,
    discounts: Vec<f64>,
) -> Result<ReservationSchedule> {
    let n = times.len();
    if discounts.len() != n {
        return Err(Error::InvalidParameter("times/discounts length mismatch".into()));
    }
    let mut thresholds = vec![0.0; n];
    let mut ladder = vec![0.0; n];
    let mut r_prev = 0.0;
    if let Some(hi) = uniform_hi(dist) {
        for m in 1..=n {
            let j = n - m; // 0-based slot index n-m+1
            let d = discounts[j];
            let x = hi / 2.0 + r_prev / (2.0 * d);
            let r = (r_prev + hi * d).powi(2) / (4.0 * hi * d);
            thresholds[j] = x;
            ladder[m - 1] = r;
            r_prev = r;
        }
    } else {
        let (lo, hi) = dist.support();
        for m in 1..=n {
            let j = n - m;
            let d = discounts[j];
            let g = |x: f64| {
                let f = dist.cdf(x);
                (1.0 - f) * x * d + f * r_prev
            };
            let (x, r) = maximize(g, lo.max(0.0), hi);
            thresholds[j] = x;
            ladder[m - 1] = r;
            r_prev = r;
        }
    }
    let mut schedule = ReservationSchedule {
        times,
        discounts,
        thresholds,
        payments: Vec::new(),
        ladder,
        ladder_semi: Vec::new(),
    };
    let (payments, ladder_semi) = semi_truthful_schedule(dist, &schedule);
    schedule.payments = payments;
    schedule.ladder_semi = ladder_semi;
    Ok(schedule)
}

/// Delay-proof payments: `rho_n = x_n` and, walking backwards,
/// `rho_j = (x_j d_j - x_j d_{j+1} + rho_{j+1} d_{j+1}) / d_j`, which makes a
/// marginal winner indifferent to a one-slot delay and every stronger winner
/// strictly prefer not to wait. Also returns the revenue ladder under these
/// payments.
///
/// On grids with sharp irregular drops the raw recursion can climb above the
/// decision threshold, which would charge a winner more than they reported;
/// payments are therefore capped at `x_j`. The cap only ever lowers a
/// payment, so the no-delay inequality is preserved.
pub fn semi_truthful_schedule(
    dist: &ValuationDistribution,
    schedule: &ReservationSchedule,
) -> (Vec<f64>, Vec<f64>) {
    let n = schedule.n();
    let x = &schedule.thresholds;
    let d = &schedule.discounts;
    let mut rho = vec![0.0; n];
    if n == 0 {
        return (rho, Vec::new());
    }
    rho[n - 1] = x[n - 1];
    for j in (0..n - 1).rev() {
        let raw = (x[j] * d[j] - x[j] * d[j + 1] + rho[j + 1] * d[j + 1]) / d[j];
        rho[j] = raw.min(x[j]);
    }
    let mut ladder = vec![0.0; n];
    let mut r_prev = 0.0;
    for m in 1..=n {
        let j = n - m;
        let f = dist.cdf(x[j]);
        ladder[m - 1] = (1.0 - f) * rho[j] * d[j] + f * r_prev;
        r_prev = ladder[m - 1];
    }
    (rho, ladder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostedRule {
    /// One price for the whole horizon.
    Fixed,
    /// Per-slot threshold, winner pays the threshold.
    Dynamic,
    /// Per-slot threshold, winner pays the delay-proof amount.
    SemiTruthful,
}

pub struct PostedMechanism {
    rule: PostedRule,
    id: MechanismId,
    lambda: f64,
    n: usize,
    /// Fixed price (valuation-units price already multiplied by nothing; the
    /// fixed rule compares reports directly against this).
    fixed_price: f64,
    schedule: ReservationSchedule,
}

impl PostedMechanism {
    pub fn new(rule: PostedRule, config: &MechanismConfig) -> Result<Self> {
        let dist = config.dist.as_ref().ok_or_else(|| {
            Error::Unsupported("posted-price mechanisms need a valuation distribution".into())
        })?;
        let n = config.expected_n as usize;
        if n == 0 {
            return Err(Error::InvalidParameter("posted grid needs n >= 1".into()));
        }
        let schedule =
            dynamic_reservation_schedule(dist, &config.curve, config.lambda, n)?;
        let fixed_price = if rule == PostedRule::Fixed {
            fixed_reservation_price(dist, &schedule.discounts)?.0
        } else {
            0.0
        };
        let id = match rule {
            PostedRule::Fixed => MechanismId::MF,
            PostedRule::Dynamic => MechanismId::MD,
            PostedRule::SemiTruthful => MechanismId::MT,
        };
        Ok(PostedMechanism { rule, id, lambda: config.lambda, n, fixed_price, schedule })
    }

    pub fn schedule(&self) -> &ReservationSchedule {
        &self.schedule
    }

    pub fn fixed_price(&self) -> f64 {
        self.fixed_price
    }

    /// Grid slot governing an arrival at time `t`: the smallest `j` with
    /// `t <= t_j` (grid arrivals map to their own slot exactly).
    fn slot_for_time(&self, t: f64) -> usize {
        let s = t * self.lambda;
        let r = s.round();
        let j = if (s - r).abs() < 1e-9 * s.abs().max(1.0) { r } else { s.ceil() };
        (j as usize).clamp(1, self.n)
    }
}

impl Mechanism for PostedMechanism {
    fn id(&self) -> MechanismId {
        self.id
    }

    fn run(&self, stream: &BidStream, _rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome {
        let mut transcript = if record { Vec::with_capacity(stream.len()) } else { Vec::new() };
        let mut winner = None;
        let mut payment = 0.0;
        for ev in &stream.events {
            let mut decision = Decision::Reject;
            let mut pay = 0.0;
            let phase = if winner.is_some() { Phase::Closed } else { Phase::Decision };
            if winner.is_none() {
                let accept = match self.rule {
                    PostedRule::Fixed => ev.price > self.fixed_price,
                    PostedRule::Dynamic | PostedRule::SemiTruthful => {
                        let j = self.slot_for_time(ev.time);
                        ev.price
                            > self.schedule.thresholds[j - 1] * self.schedule.discounts[j - 1]
                    }
                };
                if accept {
                    pay = match self.rule {
                        PostedRule::Fixed => self.fixed_price,
                        PostedRule::Dynamic => {
                            let j = self.slot_for_time(ev.time);
                            self.schedule.thresholds[j - 1] * self.schedule.discounts[j - 1]
                        }
                        PostedRule::SemiTruthful => {
                            let j = self.slot_for_time(ev.time);
                            self.schedule.payments[j - 1] * self.schedule.discounts[j - 1]
                        }
                    };
                    decision = Decision::Accept;
                    winner = Some(ev.slot);
                    payment = pay;
                }
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

/// Learning-phase wrapper: watch the first `n_s` reports without selling,
/// fit the distribution family to the de-discounted reports, then run the
/// delay-proof posted mechanism on the remaining grid. If someone wins,
/// every learning-phase buyer is paid a small credit so that sitting through
/// the learning phase is not a loss; revenue nets those credits out.
pub struct LearningMechanism {
    family: ValuationDistribution,
    curve: DiscountCurve,
    lambda: f64,
    n: usize,
    n_s: usize,
}

impl LearningMechanism {
    pub fn new(config: &MechanismConfig) -> Result<Self> {
        let family = config.dist.clone().ok_or_else(|| {
            Error::Unsupported("learning mechanism needs a distribution family".into())
        })?;
        let n = config.expected_n as usize;
        if n < 2 {
            return Err(Error::InvalidParameter("learning needs at least two buyers".into()));
        }
        let default_ns = ((n as f64).sqrt().ceil() as usize).min(n - 1);
        let n_s = config.learning_samples.unwrap_or(default_ns).max(1);
        if n_s >= n {
            return Err(Error::InvalidParameter(format!(
                "learning phase n_s = {n_s} must be smaller than n = {n}"
            )));
        }
        Ok(LearningMechanism {
            family,
            curve: config.curve.clone(),
            lambda: config.lambda,
            n,
            n_s,
        })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    fn slot_for_time(&self, t: f64) -> usize {
        let s = t * self.lambda;
        let r = s.round();
        let j = if (s - r).abs() < 1e-9 * s.abs().max(1.0) { r } else { s.ceil() };
        (j as usize).clamp(1, self.n)
    }
}

impl Mechanism for LearningMechanism {
    fn id(&self) -> MechanismId {
        MechanismId::ML
    }

    fn run(&self, stream: &BidStream, _rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome {
        if stream.len() <= self.n_s {
            // Not enough arrivals to finish learning: no sale.
            let mut out = AuctionOutcome::no_sale();
            if record {
                out.transcript = stream
                    .events
                    .iter()
                    .map(|ev| DecisionRecord {
                        slot: ev.slot,
                        time: ev.time,
                        price: ev.price,
                        phase: Phase::Learning,
                        decision: Decision::Reject,
                        payment: 0.0,
                    })
                    .collect();
                out.utilities = vec![0.0; stream.len()];
            }
            return out;
        }

        let samples: Vec<f64> = stream.events[..self.n_s]
            .iter()
            .map(|ev| ev.price / self.curve.value(ev.time))
            .collect();
        let fitted = ValuationDistribution::fit(&self.family, &samples)
            .expect("n_s >= 1 samples");

        // Delay-proof schedule over the post-learning grid slots.
        let times: Vec<f64> = (self.n_s + 1..=self.n)
            .map(|j| (j as f64 / self.lambda).min(self.curve.horizon()))
            .collect();
        let discounts: Vec<f64> = times.iter().map(|&t| self.curve.value(t)).collect();
        let schedule = match dynamic_schedule_for_grid(&fitted, times, discounts) {
            Ok(s) => s,
            Err(_) => return AuctionOutcome::no_sale(),
        };
        let grid0 = self.n_s + 1; // global slot index of schedule entry 0

        let mut transcript = if record { Vec::with_capacity(stream.len()) } else { Vec::new() };
        let mut winner = None;
        let mut payment = 0.0;
        let mut win_grid_j = 0usize;
        for (i, ev) in stream.events.iter().enumerate() {
            let mut decision = Decision::Reject;
            let mut pay = 0.0;
            let phase = if i < self.n_s {
                Phase::Learning
            } else if winner.is_some() {
                Phase::Closed
            } else {
                Phase::Decision
            };
            if phase == Phase::Decision {
                let j = self.slot_for_time(ev.time).max(grid0);
                let idx = j - grid0;
                if idx < schedule.n()
                    && ev.price > schedule.thresholds[idx] * schedule.discounts[idx]
                {
                    pay = schedule.payments[idx] * schedule.discounts[idx];
                    decision = Decision::Accept;
                    winner = Some(ev.slot);
                    payment = pay;
                    win_grid_j = j;
                }
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

        // Compensation for the learning phase, paid only when a sale happens.
        let mut compensation = 0.0;
        if winner.is_some() {
            let idx = win_grid_j - grid0;
            let x_j = schedule.thresholds[idx];
            let x_prev = if idx > 0 { schedule.thresholds[idx - 1] } else { x_j };
            let d_j = schedule.discounts[idx];
            let rho_j = schedule.payments[idx];
            let per_buyer = ((x_prev + x_j) / 2.0 * d_j - rho_j * d_j) * (x_prev - x_j)
                / win_grid_j as f64;
            compensation = per_buyer.max(0.0) * self.n_s as f64;
            if record {
                for ev in &stream.events[..self.n_s] {
                    transcript.push(DecisionRecord {
                        slot: ev.slot,
                        time: ev.time,
                        price: ev.price,
                        phase: Phase::Compensation,
                        decision: Decision::Credit,
                        payment: -per_buyer.max(0.0),
                    });
                }
            }
        }

        let mut utilities = Vec::new();
        if record {
            utilities = vec![0.0; stream.len()];
            if let Some(w) = winner {
                utilities[w - 1] = stream.events[w - 1].price - payment;
                let per_buyer = compensation / self.n_s as f64;
                for u in utilities.iter_mut().take(self.n_s) {
                    *u += per_buyer;
                }
            }
        }
        AuctionOutcome {
            winner,
            payment,
            revenue: if winner.is_some() { payment - compensation } else { 0.0 },
            utilities,
            transcript,
            flags: Vec::new(),
        }
    }
}
