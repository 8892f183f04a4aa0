//! The mechanism zoo behind one streaming contract: a mechanism consumes
//! arrival events in order and emits an irrevocable decision per event.

mod posted;
mod select;
mod simple;

pub use posted::{
    dynamic_reservation_schedule, dynamic_schedule_for_grid, fixed_reservation_price,
    semi_truthful_schedule, LearningMechanism, PostedMechanism, PostedRule, ReservationSchedule,
};
pub use select::{observe_then_select, DecisionState, SelectKind, SelectMechanism};
pub use simple::{BrokenOvercharge, KnownOptMechanism, VickreyBaseline};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::DiscountCurve;
use crate::dist::ValuationDistribution;
use crate::market::{AuctionOutcome, BidStream};
use crate::{Error, Result};

/// Identifiers for every runnable mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    /// Random star-class observe/select with a late-class fallback.
    MR,
    /// Always selects class 1; no fallback.
    M1,
    /// Star class drawn proportionally to class weights.
    MW,
    /// Deterministically selects the heaviest class by `n_c / B^c`.
    MMW,
    /// Modified observe-then-decide restricted to class 1 (accepts the last
    /// class arrival when nobody beats the observed maximum).
    Mod1,
    /// Posted price at half a revenue estimate.
    MZ,
    /// Fixed reservation price from the valuation distribution.
    MF,
    /// Dynamic reservation prices by backward induction.
    MD,
    /// Dynamic prices with the delay-proof payment schedule.
    MT,
    /// Learning phase plus `MT` with compensation credits.
    ML,
    /// Offline second-price baseline run as a pseudo-mechanism.
    Vickrey,
    /// Negative control: overpays its winner (violates IR on purpose).
    Broken,
}

impl MechanismId {
    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "m_r" | "mr" => MechanismId::MR,
            "m_1" | "m1" => MechanismId::M1,
            "m_w" | "mw" => MechanismId::MW,
            "m_mw" | "mmw" | "m_w_max" => MechanismId::MMW,
            "mod1" | "mod_1" => MechanismId::Mod1,
            "m_z" | "mz" => MechanismId::MZ,
            "m_f" | "mf" => MechanismId::MF,
            "m_d" | "md" => MechanismId::MD,
            "m_t" | "mt" => MechanismId::MT,
            "m_l" | "ml" => MechanismId::ML,
            "vickrey" => MechanismId::Vickrey,
            "broken" => MechanismId::Broken,
            other => return Err(Error::InvalidParameter(format!("unknown mechanism `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismId::MR => "m_r",
            MechanismId::M1 => "m_1",
            MechanismId::MW => "m_w",
            MechanismId::MMW => "m_mw",
            MechanismId::Mod1 => "mod1",
            MechanismId::MZ => "m_z",
            MechanismId::MF => "m_f",
            MechanismId::MD => "m_d",
            MechanismId::MT => "m_t",
            MechanismId::ML => "m_l",
            MechanismId::Vickrey => "vickrey",
            MechanismId::Broken => "broken",
        }
    }

    /// All mechanisms that belong in a default sweep (excludes the offline
    /// baseline and the negative control).
    pub fn sweep_set() -> Vec<MechanismId> {
        use MechanismId::*;
        vec![MR, M1, MW, MMW, Mod1, MZ, MF, MD, MT, ML]
    }

    /// Truthfulness the mechanism is documented to provide, as
    /// `(value_truthful, delay_proof)`. Probe regressions key off this.
    pub fn documented_truthful(&self) -> (bool, bool) {
        match self {
            MechanismId::MD => (true, false),
            MechanismId::Broken => (false, false),
            MechanismId::Mod1 => (true, false),
            _ => (true, true),
        }
    }
}

/// Comparison convention inside the observe/select subroutine.
///
/// `Valuation` compares de-discounted reports `r / d(t)` and charges the
/// observed top valuation times the winner's discount; `Price` compares raw
/// reports and charges the observed top report. Within one class the two
/// differ by at most the class base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    Valuation,
    Price,
}

/// Where the observation-phase size `x = floor(n_c / 2)` comes from:
/// the expected class population `lambda * |T_c|`, or the realized arrival
/// count (diagnostic mode; requires the full stream).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    Expected,
    Realized,
}

/// Everything a mechanism needs to be instantiated for one experiment cell.
/// A config plus a stream (plus the run seed) determines the outcome exactly.
#[derive(Debug, Clone)]
pub struct MechanismConfig {
    pub curve: DiscountCurve,
    pub lambda: f64,
    pub horizon: f64,
    /// Expected buyer count (sizes reserved classes and posted grids).
    pub expected_n: u64,
    /// Class base `B > 1`.
    pub base: f64,
    /// Assumed bound exponent on the top-valuation gap (`v1/v2 <= n^k`).
    pub k: f64,
    pub compare: CompareMode,
    pub count_mode: CountMode,
    /// Planning distribution for the posted-price family.
    pub dist: Option<ValuationDistribution>,
    /// Learning-phase sample count for `ML` (default `ceil(sqrt(n))`).
    pub learning_samples: Option<usize>,
    /// `MZ` charges `z_factor * opt1(stream) / 2`; 1.0 means the exact
    /// realized optimum is known.
    pub z_factor: f64,
}

impl MechanismConfig {
    pub fn new(curve: DiscountCurve, lambda: f64, horizon: f64, expected_n: u64) -> Self {
        MechanismConfig {
            curve,
            lambda,
            horizon,
            expected_n,
            base: 2.0,
            k: 1.0,
            compare: CompareMode::Valuation,
            count_mode: CountMode::Expected,
            dist: None,
            learning_samples: None,
            z_factor: 1.0,
        }
    }

    pub fn with_dist(mut self, dist: ValuationDistribution) -> Self {
        self.dist = Some(dist);
        self
    }
}

/// A mechanism instantiated for one cell. Single-run state lives inside
/// `run`; the object itself is immutable and shareable across replications.
pub trait Mechanism: Send + Sync {
    fn id(&self) -> MechanismId;

    /// Processes the stream in arrival order. `record` controls whether the
    /// transcript and per-slot utilities are materialized; decisions are
    /// identical either way.
    fn run(&self, stream: &BidStream, rng: &mut ChaCha8Rng, record: bool) -> AuctionOutcome;
}

/// Instantiates a mechanism for a cell.
pub fn build(id: MechanismId, config: &MechanismConfig) -> Result<Box<dyn Mechanism>> {
    Ok(match id {
        MechanismId::MR => Box::new(SelectMechanism::new(SelectKind::Randomized, config)?),
        MechanismId::M1 => Box::new(SelectMechanism::new(SelectKind::FixedFirst, config)?),
        MechanismId::MW => Box::new(SelectMechanism::new(SelectKind::Weighted, config)?),
        MechanismId::MMW => Box::new(SelectMechanism::new(SelectKind::MostWeighted, config)?),
        MechanismId::Mod1 => Box::new(SelectMechanism::new(SelectKind::ModifiedFirst, config)?),
        MechanismId::MZ => Box::new(KnownOptMechanism::new(config.z_factor)),
        MechanismId::MF => Box::new(PostedMechanism::new(PostedRule::Fixed, config)?),
        MechanismId::MD => Box::new(PostedMechanism::new(PostedRule::Dynamic, config)?),
        MechanismId::MT => Box::new(PostedMechanism::new(PostedRule::SemiTruthful, config)?),
        MechanismId::ML => Box::new(LearningMechanism::new(config)?),
        MechanismId::Vickrey => Box::new(VickreyBaseline),
        MechanismId::Broken => Box::new(BrokenOvercharge),
    })
}
