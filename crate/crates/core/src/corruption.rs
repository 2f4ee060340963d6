//! Oblivious adversaries that flip observed click bits.
//!
//! A corrupted round costs one unit of budget no matter how many bits are
//! flipped, since the per-round charge is the largest per-item perturbation.

use std::fmt;
use std::str::FromStr;

use crate::env::CascadeFeedback;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionBudget {
    total: u64,
    spent: u64,
}

impl CorruptionBudget {
    pub fn new(total: u64) -> Self {
        Self { total, spent: 0 }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.spent
    }

    fn charge(&mut self) -> bool {
        if self.spent < self.total {
            self.spent += 1;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdversaryStrategy {
    #[default]
    None,
    /// Corrupts every round from the first until the budget runs out.
    FlipEarly,
    /// Corrupts rounds `start..start + len` (1-based) while budget remains.
    FlipWindow { start: u64, len: u64 },
}

impl AdversaryStrategy {
    pub fn targets(&self, round: u64) -> bool {
        match *self {
            AdversaryStrategy::None => false,
            AdversaryStrategy::FlipEarly => true,
            AdversaryStrategy::FlipWindow { start, len } => {
                round >= start && round < start.saturating_add(len)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AdversaryStrategy::None => "none",
            AdversaryStrategy::FlipEarly => "flip-early",
            AdversaryStrategy::FlipWindow { .. } => "flip-window",
        }
    }

    /// Rounds this strategy would corrupt over `horizon` with unlimited budget.
    pub fn scheduled_rounds(&self, horizon: u64) -> u64 {
        match *self {
            AdversaryStrategy::None => 0,
            AdversaryStrategy::FlipEarly => horizon,
            AdversaryStrategy::FlipWindow { start, len } => {
                if start == 0 || start > horizon {
                    0
                } else {
                    len.min(horizon - start + 1)
                }
            }
        }
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

/// Kind names as used in config files; window bounds are set separately.
impl FromStr for AdversaryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "flip-early" | "flip_early" => Ok(Self::FlipEarly),
            "flip-window" | "flip_window" => Ok(Self::FlipWindow { start: 1, len: 0 }),
            other => Err(Error::Config(format!("unknown corruption kind `{other}`"))),
        }
    }
}

/// Flip-early over the first `budget` rounds; no adversary when the budget is 0.
pub fn default_adversary(budget: u64) -> AdversaryStrategy {
    if budget == 0 {
        AdversaryStrategy::None
    } else {
        AdversaryStrategy::FlipEarly
    }
}

/// Budget for a corruption rate expressed as a fraction of the horizon.
pub fn budget_for_rate(rate: f64, horizon: u64) -> u64 {
    (rate.clamp(0.0, 1.0) * horizon as f64).round() as u64
}

/// Applies the adversary to one round of feedback.
///
/// A corrupted round inverts every examined bit. The stop position is then
/// re-derived so the trace stays a valid cascade: observations end at the
/// first reported click, and if no click is reported every position reads 0.
pub fn corrupt(
    feedback: CascadeFeedback,
    round: u64,
    budget: &mut CorruptionBudget,
    strategy: &AdversaryStrategy,
) -> CascadeFeedback {
    if !strategy.targets(round) || !budget.charge() {
        return feedback;
    }
    let d = feedback.list().len();
    let mut flipped: Vec<bool> = feedback.clicks().iter().map(|&b| !b).collect();
    match flipped.iter().position(|&b| b) {
        Some(i) => flipped.truncate(i + 1),
        None => flipped.resize(d, false),
    }
    let list = feedback.list().clone();
    CascadeFeedback::from_clicks(list, flipped).expect("flipped prefix is a valid cascade")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RankedList;

    fn fb(clicks: &[bool]) -> CascadeFeedback {
        let list = RankedList::new(vec![4, 3, 2, 1, 0], 5).unwrap();
        CascadeFeedback::from_clicks(list, clicks.to_vec()).unwrap()
    }

    #[test]
    fn flip_early_flips_and_charges_one() {
        let mut budget = CorruptionBudget::new(100);
        let out = corrupt(
            fb(&[false, false, true]),
            50,
            &mut budget,
            &AdversaryStrategy::FlipEarly,
        );
        assert_eq!(budget.spent(), 1);
        // 0,0,1 flips to 1,1,0: the first reported click is at position 1.
        assert_eq!(out.stop_position(), 1);
        assert_eq!(out.clicks(), &[true]);
    }

    #[test]
    fn flipped_first_click_reports_no_click() {
        let mut budget = CorruptionBudget::new(1);
        let out = corrupt(fb(&[true]), 1, &mut budget, &AdversaryStrategy::FlipEarly);
        assert_eq!(out.stop_position(), 6);
        assert_eq!(out.clicks(), &[false; 5]);
    }

    #[test]
    fn no_click_becomes_first_position_click() {
        let mut budget = CorruptionBudget::new(1);
        let out = corrupt(
            fb(&[false; 5]),
            1,
            &mut budget,
            &AdversaryStrategy::FlipEarly,
        );
        assert_eq!(out.stop_position(), 1);
    }

    #[test]
    fn none_is_identity() {
        let mut budget = CorruptionBudget::new(10);
        let input = fb(&[false, true]);
        let out = corrupt(input.clone(), 1, &mut budget, &AdversaryStrategy::None);
        assert_eq!(out, input);
        assert_eq!(budget.spent(), 0);
    }

    #[test]
    fn exhausted_budget_passes_through() {
        let c = 3;
        let mut budget = CorruptionBudget::new(c);
        for round in 1..=c {
            corrupt(
                fb(&[true]),
                round,
                &mut budget,
                &AdversaryStrategy::FlipEarly,
            );
        }
        assert_eq!(budget.spent(), c);
        let input = fb(&[true]);
        let out = corrupt(
            input.clone(),
            c + 1,
            &mut budget,
            &AdversaryStrategy::FlipEarly,
        );
        assert_eq!(out, input);
        assert_eq!(budget.spent(), c);
    }

    #[test]
    fn window_targets_only_its_rounds() {
        let s = AdversaryStrategy::FlipWindow { start: 10, len: 5 };
        assert!(!s.targets(9));
        assert!(s.targets(10));
        assert!(s.targets(14));
        assert!(!s.targets(15));
        assert_eq!(s.scheduled_rounds(12), 3);
        assert_eq!(s.scheduled_rounds(100), 5);
    }

    #[test]
    fn default_adversary_rates() {
        assert_eq!(default_adversary(0), AdversaryStrategy::None);
        assert_eq!(default_adversary(2000), AdversaryStrategy::FlipEarly);
        assert_eq!(budget_for_rate(0.05, 40_000), 2000);
        assert_eq!(budget_for_rate(0.25, 40_000), 10_000);
    }
}
