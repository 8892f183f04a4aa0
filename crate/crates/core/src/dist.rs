//! Valuation distributions: sampling for the simulator and evaluable CDFs for
//! the posted-price schedules.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A buyer-valuation distribution with an evaluable CDF and support bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ValuationDistribution {
    Uniform { lo: f64, hi: f64 },
    /// Normal truncated at zero when sampling (resampled, not clamped).
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    /// Step CDF over a finite sample multiset; points kept sorted ascending.
    Empirical { points: Vec<f64> },
}

impl ValuationDistribution {
    /// Empirical distribution over a sample multiset.
    pub fn empirical(mut points: Vec<f64>) -> Self {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ValuationDistribution::Empirical { points }
    }

    /// The experiment presets: `uni` = Uniform(0, 200), `nor` = Normal(100, 20),
    /// `exp` = Exponential(rate 1/50). (`ext` is an instance preset, not a
    /// distribution; see `instances`.)
    pub fn preset(id: &str) -> Result<Self> {
        match id.to_ascii_lowercase().as_str() {
            "uni" | "uniform" => Ok(ValuationDistribution::Uniform { lo: 0.0, hi: 200.0 }),
            "nor" | "normal" => Ok(ValuationDistribution::Normal { mean: 100.0, sd: 20.0 }),
            "exp" | "exponential" => Ok(ValuationDistribution::Exponential { rate: 1.0 / 50.0 }),
            other => Err(Error::InvalidParameter(format!("unknown distribution `{other}`"))),
        }
    }

    /// Support bounds used to bracket numeric searches. For unbounded
    /// families this is a quantile range that carries all but ~1e-9 mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ValuationDistribution::Uniform { lo, hi } => (*lo, *hi),
            ValuationDistribution::Normal { mean, sd } => ((mean - 6.0 * sd).max(0.0), mean + 6.0 * sd),
            ValuationDistribution::Exponential { rate } => (0.0, -(1e-9f64).ln() / rate),
            ValuationDistribution::Empirical { points } => {
                let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo.min(hi), hi.max(lo))
            }
        }
    }

    /// CDF `P(V <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ValuationDistribution::Uniform { lo, hi } => {
                if hi <= lo {
                    return if x >= *hi { 1.0 } else { 0.0 };
                }
                ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
            ValuationDistribution::Normal { mean, sd } => {
                if !(*sd > 0.0) {
                    return if x >= *mean { 1.0 } else { 0.0 };
                }
                0.5 * statrs::function::erf::erfc((mean - x) / (sd * std::f64::consts::SQRT_2))
            }
            ValuationDistribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            ValuationDistribution::Empirical { points } => {
                if points.is_empty() {
                    return 1.0;
                }
                debug_assert!(points.windows(2).all(|w| w[0] <= w[1]), "points must be sorted");
                let count = points.partition_point(|&p| p <= x);
                count as f64 / points.len() as f64
            }
        }
    }

    /// Draws one valuation. Normal draws below zero are resampled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ValuationDistribution::Uniform { lo, hi } => {
                if hi <= lo {
                    *lo
                } else {
                    Uniform::new(*lo, *hi).sample(rng)
                }
            }
            ValuationDistribution::Normal { mean, sd } => {
                let dist = Normal::new(*mean, *sd).expect("valid normal");
                loop {
                    let v = dist.sample(rng);
                    if v >= 0.0 {
                        return v;
                    }
                }
            }
            ValuationDistribution::Exponential { rate } => {
                Exp::new(*rate).expect("valid exp").sample(rng)
            }
            ValuationDistribution::Empirical { points } => {
                if points.is_empty() {
                    0.0
                } else {
                    points[rng.gen_range(0..points.len())]
                }
            }
        }
    }

    /// Checks that the density carries its mass over the reported support
    /// (numerically, to 1e-6).
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        let mass = self.cdf(hi) - self.cdf(lo) + if lo <= 0.0 { self.cdf(lo) } else { 0.0 };
        if mass < 1.0 - 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "distribution mass over support is only {mass}"
            )));
        }
        Ok(())
    }

    /// Maximum-likelihood fit of this family to de-discounted observations.
    /// Degenerate fits are widened so the result stays a usable distribution.
    pub fn fit(family: &ValuationDistribution, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("cannot fit a distribution to no samples".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        Ok(match family {
            ValuationDistribution::Uniform { .. } => {
                let hi = samples.iter().cloned().fold(0.0, f64::max);
                let hi = if hi > 0.0 { hi } else { 1e-9 };
                ValuationDistribution::Uniform { lo: 0.0, hi }
            }
            ValuationDistribution::Normal { .. } => {
                let var = samples.iter().map(|&s| (s - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                let sd = if sd > 0.0 { sd } else { (mean.abs().max(1.0)) * 1e-3 };
                ValuationDistribution::Normal { mean, sd }
            }
            ValuationDistribution::Exponential { .. } => {
                let rate = if mean > 0.0 { 1.0 / mean } else { 1e9 };
                ValuationDistribution::Exponential { rate }
            }
            ValuationDistribution::Empirical { .. } => {
                ValuationDistribution::empirical(samples.to_vec())
            }
        })
    }
}
