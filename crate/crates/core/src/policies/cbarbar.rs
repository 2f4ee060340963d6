//! CascadeCBARBAR: epoch-based elimination with cascade rewards.
//!
//! Each epoch fixes a sampling distribution over one designated list per item
//! plus the current best list. Epoch lengths come from per-item gap
//! estimates; at the end of an epoch the empirical means of each item (taken
//! from rounds that played its designated list) refresh the lists and gaps.

use rand::{Rng, RngCore};

use super::{check_feedback, Policy, PolicyConfig};
use crate::env::{reward_of, top_d, CascadeFeedback, RankedList};
use crate::error::Result;

/// Sampling plan of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub epoch: u32,
    /// `lambda (gap_k / d)^-2` per item, before rounding.
    pub item_targets: Vec<f64>,
    /// `lambda d^2 K 2^((m - 1) / 2)`, before rounding.
    pub best_target: f64,
    /// Epoch length: sum of the rounded-up targets.
    pub length: u64,
    /// Probabilities of the item lists followed by the best list.
    pub probs: Vec<f64>,
}

/// Summary of a closed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub planned_length: u64,
    pub realized_length: u64,
    pub gaps_before: Vec<f64>,
    pub gaps_after: Vec<f64>,
    pub means: Vec<f64>,
}

/// Draws an index from a categorical distribution given by `probs`.
pub fn sample_slot<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// `k` at the head, followed by the best `d - 1` other items by `scores`.
fn list_with(k: usize, scores: &[f64], d: usize) -> Vec<usize> {
    let mut items = vec![k];
    let mut rest: Vec<usize> = (0..scores.len()).filter(|&j| j != k).collect();
    rest.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    items.extend(rest.into_iter().take(d - 1));
    items
}

#[derive(Debug, Clone)]
pub struct CascadeCbarbar {
    d: usize,
    lambda: f64,
    gaps: Vec<f64>,
    item_lists: Vec<RankedList>,
    best_list: RankedList,
    plan: EpochPlan,
    /// Items whose designated list equals each slot's list.
    slot_owners: Vec<Vec<usize>>,
    rounds_in_epoch: u64,
    ones: Vec<u64>,
    seen: Vec<u64>,
    means: Vec<f64>,
    pending: Option<(usize, RankedList)>,
    history: Vec<EpochRecord>,
}

impl CascadeCbarbar {
    pub fn new(num_items: usize, d: usize, horizon: u64, config: &PolicyConfig) -> Self {
        assert!(d >= 1 && d <= num_items, "list size out of range");
        let lambda = config
            .lambda
            .unwrap_or_else(|| Self::default_lambda(num_items, horizon, config.delta));
        let scores: Vec<f64> = (0..num_items).map(|k| -(k as f64)).collect();
        let item_lists = (0..num_items)
            .map(|k| RankedList::from_vec_unchecked(list_with(k, &scores, d)))
            .collect();
        let best_list = RankedList::from_vec_unchecked((0..d).collect());
        let mut policy = Self {
            d,
            lambda,
            gaps: vec![1.0; num_items],
            item_lists,
            best_list,
            plan: EpochPlan {
                epoch: 0,
                item_targets: Vec::new(),
                best_target: 0.0,
                length: 0,
                probs: Vec::new(),
            },
            slot_owners: Vec::new(),
            rounds_in_epoch: 0,
            ones: vec![0; num_items],
            seen: vec![0; num_items],
            means: vec![0.0; num_items],
            pending: None,
            history: Vec::new(),
        };
        policy.start_epoch(1);
        policy
    }

    /// `1024 ln^2((8K / delta) ln^2 T)`.
    pub fn default_lambda(num_items: usize, horizon: u64, delta: f64) -> f64 {
        let log_t = (horizon.max(2) as f64).ln();
        let inner = (8.0 * num_items as f64 / delta) * log_t * log_t;
        1024.0 * inner.ln().powi(2)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn plan(&self) -> &EpochPlan {
        &self.plan
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn item_lists(&self) -> &[RankedList] {
        &self.item_lists
    }

    pub fn best_list(&self) -> &RankedList {
        &self.best_list
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    fn num_items(&self) -> usize {
        self.gaps.len()
    }

    fn start_epoch(&mut self, epoch: u32) {
        let k = self.num_items();
        let d2 = (self.d * self.d) as f64;
        let best_target = self.lambda * d2 * k as f64 * 2f64.powf((epoch as f64 - 1.0) / 2.0);
        let item_targets: Vec<f64> = self
            .gaps
            .iter()
            .map(|&g| self.lambda * d2 / (g * g))
            .collect();
        let counts: Vec<u64> = item_targets
            .iter()
            .chain(std::iter::once(&best_target))
            .map(|&n| n.ceil() as u64)
            .collect();
        let length: u64 = counts.iter().sum();
        let probs = counts.iter().map(|&c| c as f64 / length as f64).collect();
        self.plan = EpochPlan {
            epoch,
            item_targets,
            best_target,
            length,
            probs,
        };

        let slots: Vec<&RankedList> = self
            .item_lists
            .iter()
            .chain(std::iter::once(&self.best_list))
            .collect();
        self.slot_owners = slots
            .iter()
            .map(|list| (0..k).filter(|&j| &self.item_lists[j] == *list).collect())
            .collect();

        self.rounds_in_epoch = 0;
        self.ones.iter_mut().for_each(|x| *x = 0);
        self.seen.iter_mut().for_each(|x| *x = 0);
    }

    fn close_epoch(&mut self) {
        let m = self.plan.epoch;
        for k in 0..self.num_items() {
            // No observation of k through its own list: keep last epoch's mean.
            if self.seen[k] > 0 {
                self.means[k] = self.ones[k] as f64 / self.seen[k] as f64;
            }
        }
        let d = self.d;
        let best = top_d(&self.means, d);
        let best_reward = reward_of(&best, &self.means);
        let floor = 2f64.powf(-(m as f64) / 4.0);
        let gaps_before = self.gaps.clone();
        for k in 0..self.num_items() {
            let items = list_with(k, &self.means, d);
            let pessimistic = reward_of(&items, &self.means);
            self.gaps[k] = floor
                .max(best_reward - pessimistic)
                .max(gaps_before[k] / 2.0);
            self.item_lists[k] = RankedList::from_vec_unchecked(items);
        }
        self.best_list = RankedList::from_vec_unchecked(best);
        self.history.push(EpochRecord {
            epoch: m,
            planned_length: self.plan.length,
            realized_length: self.rounds_in_epoch,
            gaps_before,
            gaps_after: self.gaps.clone(),
            means: self.means.clone(),
        });
        self.start_epoch(m + 1);
    }
}

impl Policy for CascadeCbarbar {
    fn name(&self) -> &str {
        "cbarbar"
    }

    fn recommend(&mut self, _round: u64, rng: &mut dyn RngCore) -> RankedList {
        let slot = sample_slot(&self.plan.probs, rng);
        let list = if slot < self.num_items() {
            self.item_lists[slot].clone()
        } else {
            self.best_list.clone()
        };
        self.pending = Some((slot, list.clone()));
        list
    }

    fn update(&mut self, feedback: &CascadeFeedback) -> Result<()> {
        check_feedback(self.pending.as_ref().map(|(_, l)| l), feedback)?;
        let (slot, _) = self.pending.take().expect("checked above");
        for &k in &self.slot_owners[slot] {
            if let Some((_, bit)) = feedback.observations().find(|&(item, _)| item == k) {
                self.seen[k] += 1;
                self.ones[k] += bit as u64;
            }
        }
        self.rounds_in_epoch += 1;
        if self.rounds_in_epoch == self.plan.length {
            self.close_epoch();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(lambda: f64) -> PolicyConfig {
        PolicyConfig {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    #[test]
    fn first_epoch_targets() {
        let (k, d, lambda) = (5, 2, 3.0);
        let p = CascadeCbarbar::new(k, d, 1000, &config(lambda));
        let plan = p.plan();
        assert_eq!(plan.epoch, 1);
        assert_eq!(plan.best_target, lambda * 4.0 * 5.0);
        assert!(plan.item_targets.iter().all(|&n| n == lambda * 4.0));
        assert_eq!(plan.length, 5 * 12 + 60);
        assert!((plan.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.gaps().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn floor_gap_target() {
        // With gap at the floor 2^(-m/4): lambda (gap/d)^-2 = lambda d^2 2^(m/2).
        let m = 3.0;
        let (lambda, d) = (2.0, 3.0);
        let gap: f64 = 2f64.powf(-m / 4.0);
        let target = lambda * (gap / d).powi(-2);
        assert!((target - lambda * d * d * 2f64.powf(m / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn default_lambda_formula() {
        let (k, t, delta) = (16usize, 40_000u64, 0.05);
        let lt = (t as f64).ln();
        let expect = 1024.0 * ((8.0 * 16.0 / delta) * lt * lt).ln().powi(2);
        assert!((CascadeCbarbar::default_lambda(k, t, delta) - expect).abs() < 1e-6);
    }

    #[test]
    fn initial_item_lists_contain_item_first() {
        let p = CascadeCbarbar::new(6, 3, 100, &config(1.0));
        for (k, l) in p.item_lists().iter().enumerate() {
            assert_eq!(l.items()[0], k);
            assert_eq!(l.len(), 3);
        }
        assert_eq!(p.best_list().items(), &[0, 1, 2]);
    }

    #[test]
    fn degenerate_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_slot(&[0.0, 0.0, 1.0], &mut rng), 2);
        }
    }

    #[test]
    fn slot_frequencies() {
        let probs = [0.1, 0.25, 0.05, 0.6];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_slot(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / n as f64 - p).abs() <= 0.01);
        }
    }

    #[test]
    fn close_with_exact_means() {
        // Close an epoch by hand with means equal to the true mu.
        let mut p = CascadeCbarbar::new(3, 2, 100, &config(1.0));
        let mu = [0.9, 0.5, 0.1];
        p.means = mu.to_vec();
        p.close_epoch();
        assert_eq!(p.best_list().items(), &[0, 1]);
        let rec = &p.history()[0];
        // Items in the best list keep the floor / halving bound.
        for k in [0, 1] {
            assert_eq!(rec.gaps_after[k], 2f64.powf(-0.25).max(0.5));
        }
        // Best list containing item 2 is {2, 0}: 0.91, so the gap is 0.04,
        // below the floor 2^(-1/4).
        assert_eq!(p.item_lists()[2].items(), &[2, 0]);
        assert!((reward_of(&[2, 0], &mu) - 0.91).abs() < 1e-12);
        assert_eq!(rec.gaps_after[2], 2f64.powf(-0.25));
    }
}
