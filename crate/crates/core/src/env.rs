//! Cascade-click environment.
//!
//! A user scans the recommended list top-down and clicks the first attractive
//! item; only the examined prefix produces feedback. Items are 0-based
//! throughout.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// True per-item click probabilities, list size and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    mu: Vec<f64>,
    d: usize,
    horizon: u64,
}

impl EnvironmentSpec {
    pub fn new(mu: Vec<f64>, d: usize, horizon: u64) -> Result<Self> {
        if let Some((k, p)) = mu
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidEnvironment(format!(
                "click probability of item {k} is {p}, outside [0, 1]"
            )));
        }
        if d == 0 || d > mu.len() {
            return Err(Error::InvalidEnvironment(format!(
                "list size {d} must satisfy 1 <= d <= K = {}",
                mu.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidEnvironment("horizon must be positive".into()));
        }
        Ok(Self { mu, d, horizon })
    }

    /// `k` click probabilities evenly spaced from `low` to `high` inclusive.
    pub fn linspace(low: f64, high: f64, k: usize, d: usize, horizon: u64) -> Result<Self> {
        let mu = match k {
            0 => Vec::new(),
            1 => vec![low],
            _ => (0..k)
                .map(|i| low + (high - low) * i as f64 / (k - 1) as f64)
                .collect(),
        };
        Self::new(mu, d, horizon)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn num_items(&self) -> usize {
        self.mu.len()
    }

    pub fn list_size(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }
}

/// An ordered list of distinct item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankedList(Vec<usize>);

impl RankedList {
    /// Validates that `items` are distinct and below `num_items`.
    pub fn new(items: Vec<usize>, num_items: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidList("list is empty".into()));
        }
        let mut seen = vec![false; num_items];
        for &k in &items {
            if k >= num_items {
                return Err(Error::InvalidList(format!(
                    "item {k} out of range for K = {num_items}"
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidList(format!("item {k} repeated")));
            }
        }
        Ok(Self(items))
    }

    /// Validates against an environment, including the exact length `d`.
    pub fn for_env(items: Vec<usize>, env: &EnvironmentSpec) -> Result<Self> {
        if items.len() != env.list_size() {
            return Err(Error::InvalidList(format!(
                "expected {} items, got {}",
                env.list_size(),
                items.len()
            )));
        }
        Self::new(items, env.num_items())
    }

    /// Skips validation; callers guarantee distinct in-range items.
    pub(crate) fn from_vec_unchecked(items: Vec<usize>) -> Self {
        debug_assert!({
            let mut v = items.clone();
            v.sort_unstable();
            v.windows(2).all(|w| w[0] != w[1])
        });
        Self(items)
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.contains(&item)
    }
}

impl fmt::Display for RankedList {
    /// Semicolon-separated items, e.g. `3;1;2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// One round's cascade feedback.
///
/// `clicks[i]` is the observed bit at position `i` (0-based). Exactly the
/// examined prefix is present: `clicks.len() == min(stop_position, d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeFeedback {
    list: RankedList,
    stop_position: usize,
    clicks: Vec<bool>,
}

impl CascadeFeedback {
    /// Builds feedback from the examined bits, deriving the stop position.
    ///
    /// `clicks` must contain at most one `true`, as its last element, or be
    /// all `false` with length `d` (no click).
    pub fn from_clicks(list: RankedList, clicks: Vec<bool>) -> Result<Self> {
        let d = list.len();
        let stop_position = match clicks.iter().position(|&c| c) {
            Some(i) if i + 1 == clicks.len() => i + 1,
            Some(_) => {
                return Err(Error::InvalidArgument(
                    "observations continue past the first click".into(),
                ))
            }
            None if clicks.len() == d => d + 1,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "no click within {} of {d} positions",
                    clicks.len()
                )))
            }
        };
        Ok(Self {
            list,
            stop_position,
            clicks,
        })
    }

    pub fn list(&self) -> &RankedList {
        &self.list
    }

    /// 1-based position of the first click, or `d + 1` without a click.
    pub fn stop_position(&self) -> usize {
        self.stop_position
    }

    pub fn clicks(&self) -> &[bool] {
        &self.clicks
    }

    pub fn clicked(&self) -> bool {
        self.stop_position <= self.list.len()
    }

    /// `(item, bit)` for every examined position, in list order.
    pub fn observations(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.list
            .items()
            .iter()
            .copied()
            .zip(self.clicks.iter().copied())
    }
}

/// `1 - prod_{k in list} (1 - mu_k)`.
pub fn expected_reward(list: &RankedList, mu: &[f64]) -> Result<f64> {
    if let Some(&k) = list.items().iter().find(|&&k| k >= mu.len()) {
        return Err(Error::InvalidList(format!(
            "item {k} out of range for K = {}",
            mu.len()
        )));
    }
    Ok(reward_of(list.items(), mu))
}

pub(crate) fn reward_of(items: &[usize], mu: &[f64]) -> f64 {
    1.0 - items.iter().map(|&k| 1.0 - mu[k]).product::<f64>()
}

/// Indices of the `d` largest scores, ties to the smaller index, ordered by
/// descending score.
pub fn top_d(scores: &[f64], d: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(d);
    idx
}

pub fn optimal_list(mu: &[f64], d: usize) -> Result<RankedList> {
    if d == 0 || d > mu.len() {
        return Err(Error::InvalidArgument(format!(
            "list size {d} must satisfy 1 <= d <= K = {}",
            mu.len()
        )));
    }
    Ok(RankedList::from_vec_unchecked(top_d(mu, d)))
}

/// Plays `list` against the environment. Draws one uniform per examined
/// position, in position order.
pub fn sample_feedback<R: Rng + ?Sized>(
    env: &EnvironmentSpec,
    list: &RankedList,
    rng: &mut R,
) -> CascadeFeedback {
    let mut clicks = Vec::with_capacity(list.len());
    for &k in list.items() {
        let click = rng.gen::<f64>() < env.mu[k];
        clicks.push(click);
        if click {
            break;
        }
    }
    let stop_position = if clicks.last() == Some(&true) {
        clicks.len()
    } else {
        list.len() + 1
    };
    CascadeFeedback {
        list: list.clone(),
        stop_position,
        clicks,
    }
}

/// Expected-reward gap between the optimal list and `chosen`, under true mu.
pub fn per_round_regret(env: &EnvironmentSpec, chosen: &RankedList) -> Result<f64> {
    let best = optimal_list(env.mu(), env.list_size())?;
    let gap = expected_reward(&best, env.mu())? - expected_reward(chosen, env.mu())?;
    Ok(gap.max(0.0))
}
