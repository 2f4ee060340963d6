//! Ranking policies sharing one step interface: recommend, then update with
//! the (possibly corrupted) feedback for that recommendation.

mod cbarbar;
mod ucb;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

pub use cbarbar::{sample_slot, CascadeCbarbar, EpochPlan, EpochRecord};
pub use ucb::{ucb_index, MeanEstimator, Mucbv};

use crate::env::{CascadeFeedback, RankedList};
use crate::error::{Error, Result};
use crate::estimators::CalibrationParams;

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// List to play in `round` (1-based).
    fn recommend(&mut self, round: u64, rng: &mut dyn RngCore) -> RankedList;

    /// Feedback for the list returned by the last `recommend`.
    fn update(&mut self, feedback: &CascadeFeedback) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Mucbv,
    M2ucbv,
    CascadeUcbv,
    Cbarbar,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Mucbv,
        PolicyKind::M2ucbv,
        PolicyKind::CascadeUcbv,
        PolicyKind::Cbarbar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Mucbv => "mucbv",
            PolicyKind::M2ucbv => "m2ucbv",
            PolicyKind::CascadeUcbv => "cascade_ucbv",
            PolicyKind::Cbarbar => "cbarbar",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Variance term constant of the confidence radius.
    pub a: f64,
    /// Small-sample term constant of the confidence radius.
    pub b: f64,
    /// Corruption budget assumed by MUCB-V; sets the warm-up length.
    pub c_assumed: u64,
    /// Confidence level for CascadeCBARBAR.
    pub delta: f64,
    /// Replaces CascadeCBARBAR's default epoch-length constant when set.
    pub lambda: Option<f64>,
    pub estimator: CalibrationParams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 3.0,
            c_assumed: 0,
            delta: 0.05,
            lambda: None,
            estimator: CalibrationParams::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config(format!(
                "radius constants must be positive (A = {}, B = {})",
                self.a, self.b
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        self.estimator.validate()
    }
}

/// Feedback must answer the list that was last recommended.
pub(crate) fn check_feedback(
    expected: Option<&RankedList>,
    feedback: &CascadeFeedback,
) -> Result<()> {
    match expected {
        Some(l) if l == feedback.list() => Ok(()),
        _ => Err(Error::FeedbackMismatch),
    }
}
