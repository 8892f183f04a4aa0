//! Discount curves: evaluable `d(t)` with values in `(0, 1]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Discount values are clamped to at least this floor so that `d(t) > 0`
/// holds even where a preset formula touches zero at the right endpoint.
/// Far below any meaningful price scale so it never distorts one.
pub const DISCOUNT_FLOOR: f64 = 1e-300;

/// A discount curve over the horizon `[0, T]`.
///
/// Presets `D1`..`D6` are the built-in shapes used by the experiment sweeps;
/// `Table` holds an arbitrary right-closed step function and doubles as the
/// vehicle for replayed custom curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscountCurve {
    /// `D1(t) = 1 - t/T`.
    Linear { horizon: f64 },
    /// `D2(t) = exp(-4 (t-1) / (T-1))`, clamped to 1 on `[0, 1)`.
    Exponential { horizon: f64 },
    /// `D3(t) = rate^t` (the classic preset uses `rate = 0.99`).
    Geometric { horizon: f64, rate: f64 },
    /// `D4(t) = 1`: no discounting.
    Constant { horizon: f64 },
    /// `D5(t) = sqrt(1 - (t/T)^2)`: quarter-circle, slow early decay.
    Circular { horizon: f64 },
    /// `D6`: halves every two expected arrivals, then drops to `eps`.
    ///
    /// With slot times `t_j = j / lambda`, the value is `2^-(c-1)` on
    /// `(t_{2c-2}, t_{2c}]` for `c = 1..floor(log2 n)` and `eps` afterwards.
    ExtremeStep { n: u64, lambda: f64, horizon: f64, eps: f64 },
    /// Right-closed step table: value `values[i]` on `(ends[i-1], ends[i]]`
    /// (first segment starts at 0 inclusive). The last end must reach the horizon.
    Table { ends: Vec<f64>, values: Vec<f64>, horizon: f64 },
}

impl DiscountCurve {
    pub fn d1(horizon: f64) -> Self {
        DiscountCurve::Linear { horizon }
    }

    pub fn d2(horizon: f64) -> Self {
        DiscountCurve::Exponential { horizon }
    }

    pub fn d3(horizon: f64) -> Self {
        DiscountCurve::Geometric { horizon, rate: 0.99 }
    }

    pub fn d4(horizon: f64) -> Self {
        DiscountCurve::Constant { horizon }
    }

    pub fn d5(horizon: f64) -> Self {
        DiscountCurve::Circular { horizon }
    }

    pub fn d6(n: u64, lambda: f64, horizon: f64) -> Self {
        DiscountCurve::ExtremeStep { n, lambda, horizon, eps: 1e-9 }
    }

    /// Preset lookup by the identifiers used on the command line.
    pub fn preset(id: &str, n: u64, lambda: f64, horizon: f64) -> Result<Self> {
        match id.to_ascii_uppercase().as_str() {
            "D1" => Ok(Self::d1(horizon)),
            "D2" => Ok(Self::d2(horizon)),
            "D3" => Ok(Self::d3(horizon)),
            "D4" => Ok(Self::d4(horizon)),
            "D5" => Ok(Self::d5(horizon)),
            "D6" => Ok(Self::d6(n, lambda, horizon)),
            other => Err(Error::InvalidParameter(format!("unknown curve preset `{other}`"))),
        }
    }

    pub fn horizon(&self) -> f64 {
        match *self {
            DiscountCurve::Linear { horizon }
            | DiscountCurve::Exponential { horizon }
            | DiscountCurve::Geometric { horizon, .. }
            | DiscountCurve::Constant { horizon }
            | DiscountCurve::Circular { horizon }
            | DiscountCurve::ExtremeStep { horizon, .. }
            | DiscountCurve::Table { horizon, .. } => horizon,
        }
    }

    /// Evaluates `d(t)`, clamped into `[DISCOUNT_FLOOR, 1]`.
    ///
    /// `t` outside `[0, T]` is a caller bug for simulation paths; use
    /// [`DiscountCurve::try_value`] where the input is untrusted.
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0 && t <= self.horizon(), "t = {t} outside domain");
        let raw = match *self {
            DiscountCurve::Linear { horizon } => 1.0 - t / horizon,
            DiscountCurve::Exponential { horizon } => (-4.0 * (t - 1.0) / (horizon - 1.0)).exp(),
            DiscountCurve::Geometric { rate, .. } => rate.powf(t),
            DiscountCurve::Constant { .. } => 1.0,
            DiscountCurve::Circular { horizon } => {
                let x = t / horizon;
                (1.0 - x * x).max(0.0).sqrt()
            }
            DiscountCurve::ExtremeStep { n, lambda, eps, .. } => {
                let steps = (n as f64).log2().floor() as u32;
                // Segment c covers (2(c-1)/lambda, 2c/lambda].
                let idx = (t * lambda / 2.0).ceil().max(1.0) as u32;
                if steps == 0 || idx > steps {
                    eps
                } else {
                    2f64.powi(-(idx as i32 - 1))
                }
            }
            DiscountCurve::Table { ref ends, ref values, .. } => {
                let pos = ends.partition_point(|&e| e < t);
                values[pos.min(values.len() - 1)]
            }
        };
        raw.clamp(DISCOUNT_FLOOR, 1.0)
    }

    /// Like [`DiscountCurve::value`], but rejects `t` outside `[0, T]`.
    pub fn try_value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon()).contains(&t) || !t.is_finite() {
            return Err(Error::TimeOutOfDomain { t, horizon: self.horizon() });
        }
        Ok(self.value(t))
    }

    /// Maximum discount value attained on the domain.
    pub fn max_value(&self) -> f64 {
        match self {
            DiscountCurve::Table { values, .. } => {
                values.iter().cloned().fold(DISCOUNT_FLOOR, f64::max).min(1.0)
            }
            // All analytic presets peak at t = 0 (D2 is clamped to 1 there).
            _ => self.value(0.0),
        }
    }

    /// Whether the curve is non-increasing over `[0, T]`.
    ///
    /// Analytic presets are known monotone; tables are scanned.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            DiscountCurve::Table { values, .. } => values.windows(2).all(|w| w[0] >= w[1]),
            _ => true,
        }
    }

    /// Step-curve breakpoints as `(segment_end, value)` pairs, if the curve is
    /// piecewise constant. Smooth presets return `None` and are inverted by
    /// bisection instead.
    pub fn breakpoints(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            DiscountCurve::Constant { horizon } => Some(vec![(horizon, 1.0)]),
            DiscountCurve::ExtremeStep { n, lambda, horizon, eps } => {
                let steps = (n as f64).log2().floor() as i32;
                let mut out = Vec::new();
                for c in 1..=steps.max(0) {
                    let end = (2 * c) as f64 / lambda;
                    if end >= horizon {
                        out.push((horizon, 2f64.powi(-(c - 1))));
                        return Some(out);
                    }
                    out.push((end, 2f64.powi(-(c - 1))));
                }
                out.push((horizon, eps.max(DISCOUNT_FLOOR)));
                Some(out)
            }
            DiscountCurve::Table { ref ends, ref values, .. } => Some(
                ends.iter()
                    .zip(values)
                    .map(|(&e, &v)| (e, v.clamp(DISCOUNT_FLOOR, 1.0)))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Earliest time at which the (non-increasing) curve falls to `target` or
    /// below; returns the horizon if it never does. Smooth curves are bisected
    /// to an absolute tolerance of `1e-9 * T`; step curves use breakpoints.
    pub fn time_of_discount(&self, target: f64) -> f64 {
        let horizon = self.horizon();
        debug_assert!(self.is_non_increasing());
        if self.value(0.0) <= target {
            return 0.0;
        }
        if self.value(horizon) > target {
            return horizon;
        }
        if let Some(bps) = self.breakpoints() {
            // First segment whose value is <= target begins where the previous ends.
            let mut prev_end = 0.0;
            for (end, v) in bps {
                if v <= target {
                    return prev_end;
                }
                prev_end = end;
            }
            return horizon;
        }
        let tol = 1e-9 * horizon;
        let (mut lo, mut hi) = (0.0f64, horizon);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Validates table invariants on deserialized curves.
    pub fn validate(&self) -> Result<()> {
        if let DiscountCurve::Table { ends, values, horizon } = self {
            if ends.is_empty() || ends.len() != values.len() {
                return Err(Error::InvalidInstance("table curve needs matching ends/values".into()));
            }
            if ends.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInstance("table ends must be strictly increasing".into()));
            }
            if *ends.last().unwrap() < *horizon {
                return Err(Error::InvalidInstance("table must cover the horizon".into()));
            }
            if values.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::DiscountOutOfRange {
                    d: *values.iter().find(|&&v| !(v > 0.0 && v <= 1.0)).unwrap(),
                });
            }
        }
        if !(self.horizon() > 0.0) {
            return Err(Error::InvalidInstance("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Buyer-density diagnostic: whether `t(d/B) - t(d)` is non-increasing in
    /// `d` on a sampled grid. Stated as an assumption by some mechanisms, never
    /// enforced.
    pub fn has_non_increasing_buyer_density(&self, base: f64, samples: usize) -> bool {
        let mut prev: Option<f64> = None;
        for i in 1..=samples {
            // March d downward from the top value.
            let d = self.max_value() * (i as f64) / (samples as f64);
            let width = self.time_of_discount(d / base) - self.time_of_discount(d);
            if let Some(p) = prev {
                // prev corresponds to a smaller d than the current one.
                if p + 1e-9 < width {
                    return false;
                }
            }
            prev = Some(width);
        }
        true
    }
}
