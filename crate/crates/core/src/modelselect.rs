//! M²UCB-V: model selection over a grid of assumed corruption budgets.
//!
//! One MUCB-V instance runs per grid level. Each round a surviving instance is
//! drawn uniformly to act; every survivor appends the observed bits to its
//! logs, but only the acting instance is credited with the round reward.
//! Every `window` rounds, an instance whose upper reward bound falls below the
//! best lower bound among survivors is eliminated.
//!
//! This is a simplified elimination scheme, not the full corralling
//! construction: instances are sampled uniformly and compared with Hoeffding
//! widths `sqrt(2 ln T / n)`.

use rand::{Rng, RngCore};

use crate::env::{CascadeFeedback, RankedList};
use crate::error::{Error, Result};
use crate::policies::{Mucbv, Policy, PolicyConfig};

/// Assumed budgets `{0} ∪ {2^i : 0 <= i <= max_exp}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    levels: Vec<u64>,
}

impl GridSpec {
    /// Grid for horizon `horizon`; `max_exp` defaults to `ceil(log2 T)`.
    pub fn new(horizon: u64, max_exp: Option<u32>) -> Self {
        let max_exp = max_exp.unwrap_or_else(|| ceil_log2(horizon));
        let mut levels = vec![0];
        levels.extend((0..=max_exp.min(62)).map(|i| 1u64 << i));
        Self { levels }
    }

    pub fn from_levels(levels: Vec<u64>) -> Result<Self> {
        if levels.first() != Some(&0) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "grid must start at 0 and be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelSelectConfig {
    /// Rounds between elimination tests; default `ceil(K ln T)`.
    pub window: Option<u64>,
    /// Acting rounds an instance needs before it can be eliminated; default `ceil(4 ln T)`.
    pub n_min: Option<u64>,
    pub grid_max_exp: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceStats {
    pub id: usize,
    pub assumed_budget: u64,
    /// Rounds this instance acted.
    pub rounds: u64,
    /// Rounds with a reported click while this instance acted.
    pub reward_sum: u64,
    pub alive: bool,
}

impl InstanceStats {
    pub fn mean_reward(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.reward_sum as f64 / self.rounds as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct M2ucbv {
    instances: Vec<Mucbv>,
    stats: Vec<InstanceStats>,
    horizon: u64,
    window: u64,
    n_min: u64,
    round: u64,
    acting: Option<usize>,
    acting_log: Vec<usize>,
}

impl M2ucbv {
    pub fn new(
        num_items: usize,
        d: usize,
        horizon: u64,
        base: PolicyConfig,
        select: ModelSelectConfig,
    ) -> Self {
        let grid = GridSpec::new(horizon, select.grid_max_exp);
        Self::with_grid(num_items, d, horizon, base, select, &grid)
    }

    pub fn with_grid(
        num_items: usize,
        d: usize,
        horizon: u64,
        base: PolicyConfig,
        select: ModelSelectConfig,
        grid: &GridSpec,
    ) -> Self {
        let log_t = (horizon.max(2) as f64).ln();
        let window = select
            .window
            .unwrap_or_else(|| (num_items as f64 * log_t).ceil() as u64)
            .max(1);
        let n_min = select.n_min.unwrap_or_else(|| (4.0 * log_t).ceil() as u64);
        let instances = grid
            .levels()
            .iter()
            .map(|&c| {
                let config = PolicyConfig {
                    c_assumed: c,
                    ..base
                };
                Mucbv::new(
                    format!("mucbv[C={c}]"),
                    num_items,
                    d,
                    config,
                    crate::policies::MeanEstimator::CalibratedMedians,
                )
            })
            .collect::<Vec<_>>();
        let stats = grid
            .levels()
            .iter()
            .enumerate()
            .map(|(id, &c)| InstanceStats {
                id,
                assumed_budget: c,
                rounds: 0,
                reward_sum: 0,
                alive: true,
            })
            .collect();
        Self {
            instances,
            stats,
            horizon,
            window,
            n_min,
            round: 0,
            acting: None,
            acting_log: Vec::new(),
        }
    }

    pub fn stats(&self) -> &[InstanceStats] {
        &self.stats
    }

    pub fn instances(&self) -> &[Mucbv] {
        &self.instances
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    /// Instance id that acted in each round so far.
    pub fn acting_log(&self) -> &[usize] {
        &self.acting_log
    }

    pub fn alive(&self) -> impl Iterator<Item = &InstanceStats> {
        self.stats.iter().filter(|s| s.alive)
    }

    /// Hoeffding width `sqrt(2 ln T / n)`.
    pub fn width(&self, rounds: u64) -> f64 {
        (2.0 * (self.horizon.max(2) as f64).ln() / rounds.max(1) as f64).sqrt()
    }

    /// Runs the elimination test once. Returns the ids eliminated.
    pub fn eliminate(&mut self) -> Vec<usize> {
        let eligible: Vec<usize> = self
            .stats
            .iter()
            .filter(|s| s.alive && s.rounds >= self.n_min)
            .map(|s| s.id)
            .collect();
        let leader_lower = eligible
            .iter()
            .map(|&i| self.stats[i].mean_reward() - self.width(self.stats[i].rounds))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut removed = Vec::new();
        for &i in &eligible {
            let upper = self.stats[i].mean_reward() + self.width(self.stats[i].rounds);
            if upper < leader_lower {
                removed.push(i);
            }
        }
        // never eliminate the last survivor
        if removed.len() == self.alive().count() {
            removed.pop();
        }
        for &i in &removed {
            self.stats[i].alive = false;
        }
        removed
    }
}

impl Policy for M2ucbv {
    fn name(&self) -> &str {
        "m2ucbv"
    }

    fn recommend(&mut self, round: u64, rng: &mut dyn RngCore) -> RankedList {
        let alive: Vec<usize> = self.alive().map(|s| s.id).collect();
        let pick = alive[rng.gen_range(0..alive.len())];
        self.round = round;
        self.acting = Some(pick);
        self.acting_log.push(pick);
        self.instances[pick].recommend(round, rng)
    }

    fn update(&mut self, feedback: &CascadeFeedback) -> Result<()> {
        let acting = self.acting.take().ok_or(Error::FeedbackMismatch)?;
        self.instances[acting].update(feedback)?;
        for s in self.stats.iter().filter(|s| s.alive && s.id != acting) {
            self.instances[s.id].observe(feedback);
        }
        let stats = &mut self.stats[acting];
        stats.rounds += 1;
        stats.reward_sum += feedback.clicked() as u64;
        if self.round.is_multiple_of(self.window) {
            self.eliminate();
        }
        Ok(())
    }
}
