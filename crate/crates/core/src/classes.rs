//! Geometric discount classes: bands `I_c = (B^-c, B^-(c-1)]` of discount
//! values and their time preimages, populations, and selection weights.

use serde::{Deserialize, Serialize};

use crate::curve::DiscountCurve;
use crate::{Error, Result};

/// Half-open time interval `[lo, hi)`; empty when `hi <= lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TimeInterval {
    pub fn empty() -> Self {
        TimeInterval { lo: 0.0, hi: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Class id (>= 1) of a discount value: the unique `c` with
/// `d` in `(B^-c, B^-(c-1)]`.
pub fn class_of_discount(d: f64, base: f64) -> Result<u32> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::DiscountOutOfRange { d });
    }
    if !(base > 1.0) {
        return Err(Error::InvalidParameter(format!("base {base} must exceed 1")));
    }
    let mut c = ((1.0 / d).ln() / base.ln()).floor() as i64 + 1;
    // Fix up boundary drift from the logs: require B^-c < d <= B^-(c-1).
    while base.powi(-(c as i32)) >= d {
        c += 1;
    }
    while c > 1 && base.powi(-(c as i32) + 1) < d {
        c -= 1;
    }
    Ok(c as u32)
}

/// Reserved class count: `ceil((4 + k) * log_B(n) + 3)`.
///
/// The `k * log_B(n)` term stands in for the unobservable gap between the two
/// largest valuations, assumed bounded by `n^k`.
pub fn reserved_class_count(n: u64, base: f64, k: f64) -> Result<u32> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be >= 2")));
    }
    if !(base > 1.0) || !(k >= 0.0) {
        return Err(Error::InvalidParameter("need base > 1 and k >= 0".into()));
    }
    let log_n = (n as f64).ln() / base.ln();
    Ok((4.0 * log_n + 3.0 + k * log_n).ceil() as u32)
}

/// Time preimage of class `c` for a non-increasing curve, normalized so the
/// curve's maximum value sits in class 1.
///
/// Returns `[t(d_hi), t(d_lo))` clipped to the horizon; empty when the band is
/// never visited. Smooth curves are inverted by bisection, step curves use
/// their breakpoints exactly.
pub fn class_time_interval(curve: &DiscountCurve, c: u32, base: f64) -> Result<TimeInterval> {
    if c == 0 {
        return Err(Error::InvalidParameter("class ids start at 1".into()));
    }
    if !curve.is_non_increasing() {
        return Err(Error::Unsupported(
            "class intervals need a non-increasing curve".into(),
        ));
    }
    let scale = curve.max_value();
    let d_hi = scale * base.powi(-(c as i32) + 1);
    let d_lo = scale * base.powi(-(c as i32));
    let lo = if c == 1 { 0.0 } else { curve.time_of_discount(d_hi) };
    let hi = curve.time_of_discount(d_lo);
    Ok(TimeInterval { lo, hi })
}

/// Selection weight of a class: the sum of `d(t_j)` over the expected arrival
/// grid `t_j = j / lambda` restricted to the class (empty class: 0).
pub fn class_weight(curve: &DiscountCurve, c: u32, base: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let scale = curve.max_value();
    let horizon = curve.horizon();
    let mut w = 0.0;
    let mut j = 1u64;
    loop {
        let t = j as f64 / lambda;
        if t > horizon {
            break;
        }
        let d = curve.value(t);
        if class_of_discount(d / scale, base)? == c {
            w += d;
        }
        j += 1;
    }
    Ok(w)
}

/// Coarse weight estimate `n_c / B^c` used by the most-weighted selector.
pub fn class_weight_approx(n_c: f64, base: f64, c: u32) -> f64 {
    n_c * base.powi(-(c as i32))
}

/// One class row of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub id: u32,
    /// Discount band `(d_lo, d_hi]` in normalized units (max value -> 1).
    pub d_lo: f64,
    pub d_hi: f64,
    pub interval: TimeInterval,
    /// Expected population `lambda * |T_c|`.
    pub expected_n: f64,
    /// Grid weight `sum d(t_j)` over the class.
    pub weight: f64,
}

/// Reserved-class geometry for one (curve, base, n, k, lambda) context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPartition {
    pub base: f64,
    pub reserved_count: u32,
    /// Normalization applied before banding (the curve's maximum value).
    pub scale: f64,
    /// Rows for classes `1..=reserved_count` that have a non-empty preimage.
    pub classes: Vec<ClassRecord>,
}

impl ClassPartition {
    /// Builds the reserved partition. `n` is the expected buyer count that
    /// sizes the reserved set; `k` bounds the assumed top-valuation gap.
    pub fn build(curve: &DiscountCurve, base: f64, n: u64, k: f64, lambda: f64) -> Result<Self> {
        let reserved_count = reserved_class_count(n, base, k)?;
        let scale = curve.max_value();
        let mut classes = Vec::new();
        for c in 1..=reserved_count {
            let interval = class_time_interval(curve, c, base)?;
            if interval.is_empty() {
                continue;
            }
            let weight = class_weight(curve, c, base, lambda)?;
            classes.push(ClassRecord {
                id: c,
                d_lo: base.powi(-(c as i32)),
                d_hi: base.powi(-(c as i32) + 1),
                interval,
                expected_n: lambda * interval.length(),
                weight,
            });
        }
        Ok(ClassPartition { base, reserved_count, scale, classes })
    }

    /// Class id of an event with raw discount `d` (normalized internally).
    pub fn class_of(&self, d: f64) -> Result<u32> {
        class_of_discount((d / self.scale).min(1.0), self.base)
    }

    pub fn record(&self, c: u32) -> Option<&ClassRecord> {
        self.classes.iter().find(|r| r.id == c)
    }

    /// Largest imbalance between the first reserved class and any other
    /// non-empty reserved class; `None` when class 1 is empty (undefined).
    pub fn imbalance_eta(&self) -> Option<f64> {
        let n1 = self.record(1).map(|r| r.expected_n)?;
        if !(n1 > 0.0) {
            return None;
        }
        let mut eta = 1.0f64;
        for r in &self.classes {
            if r.expected_n > 0.0 {
                eta = eta.max(r.expected_n / n1).max(n1 / r.expected_n);
            }
        }
        Some(eta)
    }

    /// CSV table of the geometry: `c,d_lo,d_hi,t_lo,t_hi,n_c,w_c`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,d_lo,d_hi,t_lo,t_hi,n_c,w_c\n");
        for r in &self.classes {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                r.id, r.d_lo, r.d_hi, r.interval.lo, r.interval.hi, r.expected_n, r.weight
            ));
        }
        out
    }
}
