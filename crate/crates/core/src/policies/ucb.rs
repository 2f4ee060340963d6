//! Variance-aware cascade UCB with a pluggable mean estimator.
//!
//! With the calibrated mean-of-medians estimator and a corruption budget this
//! is MUCB-V; with the empirical mean and no warm-up it is CascadeUCB-V.

use rand::RngCore;

use super::{check_feedback, Policy, PolicyConfig};
use crate::env::{top_d, CascadeFeedback, RankedList};
use crate::error::Result;
use crate::estimators::{
    calibrated_mean_of_medians, empirical_mean, variance_proxy, Estimate, SampleLog,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanEstimator {
    CalibratedMedians,
    Empirical,
}

/// `min(mu + A sqrt(v ln t / s) + B ln t / s, 1)` with `v = mu (1 - mu)` and
/// `s = max(1, samples)`.
pub fn ucb_index(mu_hat: f64, samples: usize, round: u64, a: f64, b: f64) -> f64 {
    let s = samples.max(1) as f64;
    let log_t = (round.max(1) as f64).ln();
    let radius = a * (variance_proxy(mu_hat) * log_t / s).sqrt() + b * log_t / s;
    (mu_hat + radius).min(1.0)
}

#[derive(Debug, Clone)]
struct Warmup {
    item: usize,
    rep: u64,
    per_item: u64,
}

#[derive(Debug, Clone)]
pub struct Mucbv {
    name: String,
    d: usize,
    config: PolicyConfig,
    estimator: MeanEstimator,
    logs: Vec<SampleLog>,
    warmup: Warmup,
    /// Per item: log length at which `estimates` was last computed.
    cached_at: Vec<usize>,
    estimates: Vec<Estimate>,
    indices: Vec<f64>,
    pending: Option<RankedList>,
}

impl Mucbv {
    pub fn new(
        name: impl Into<String>,
        num_items: usize,
        d: usize,
        config: PolicyConfig,
        estimator: MeanEstimator,
    ) -> Self {
        assert!(d >= 1 && d <= num_items, "list size out of range");
        Self {
            name: name.into(),
            d,
            config,
            estimator,
            logs: vec![SampleLog::new(); num_items],
            warmup: Warmup {
                item: 0,
                rep: 0,
                per_item: 10 * config.c_assumed,
            },
            cached_at: vec![usize::MAX; num_items],
            estimates: vec![empirical_mean(&SampleLog::new()); num_items],
            indices: vec![0.0; num_items],
            pending: None,
        }
    }

    /// MUCB-V: calibrated mean of medians, warm-up of `10 K C` rounds.
    pub fn mucbv(num_items: usize, d: usize, config: PolicyConfig) -> Self {
        Self::new(
            "mucbv",
            num_items,
            d,
            config,
            MeanEstimator::CalibratedMedians,
        )
    }

    /// CascadeUCB-V: empirical means and no warm-up.
    pub fn cascade_ucbv(num_items: usize, d: usize, config: PolicyConfig) -> Self {
        let config = PolicyConfig {
            c_assumed: 0,
            ..config
        };
        Self::new(
            "cascade_ucbv",
            num_items,
            d,
            config,
            MeanEstimator::Empirical,
        )
    }

    pub fn num_items(&self) -> usize {
        self.logs.len()
    }

    pub fn c_assumed(&self) -> u64 {
        self.config.c_assumed
    }

    pub fn logs(&self) -> &[SampleLog] {
        &self.logs
    }

    /// Total warm-up length, `10 K C` rounds.
    pub fn warmup_rounds(&self) -> u64 {
        self.warmup.per_item * self.num_items() as u64
    }

    pub fn in_warmup(&self) -> bool {
        self.warmup.item < self.num_items() && self.warmup.per_item > 0
    }

    /// UCB indices from the most recent index-based recommendation.
    pub fn last_indices(&self) -> &[f64] {
        &self.indices
    }

    /// Appends the examined prefix of `feedback` to the item logs, without
    /// checking which list it answers.
    pub fn observe(&mut self, feedback: &CascadeFeedback) {
        for (item, bit) in feedback.observations() {
            self.logs[item].push(bit);
        }
    }

    fn estimate(&mut self, item: usize) -> Estimate {
        let s = self.logs[item].len();
        if self.cached_at[item] != s {
            let est = match self.estimator {
                MeanEstimator::Empirical => empirical_mean(&self.logs[item]),
                MeanEstimator::CalibratedMedians => {
                    // One partition per (item, log length): re-estimating an
                    // unchanged log reproduces the same value.
                    let key = ((item as u64) << 40) | s as u64;
                    calibrated_mean_of_medians(&self.logs[item], &self.config.estimator, key)
                }
            };
            self.estimates[item] = est;
            self.cached_at[item] = s;
        }
        self.estimates[item]
    }

    fn warmup_list(&mut self) -> RankedList {
        let k = self.warmup.item;
        let mut others: Vec<usize> = (0..self.num_items()).filter(|&j| j != k).collect();
        others.sort_by_key(|&j| (self.logs[j].len(), j));
        let mut items = Vec::with_capacity(self.d);
        items.push(k);
        items.extend(others.into_iter().take(self.d - 1));

        self.warmup.rep += 1;
        if self.warmup.rep == self.warmup.per_item {
            self.warmup.rep = 0;
            self.warmup.item += 1;
        }
        RankedList::from_vec_unchecked(items)
    }

    fn index_list(&mut self, round: u64) -> RankedList {
        for item in 0..self.num_items() {
            let est = self.estimate(item);
            self.indices[item] = ucb_index(
                est.value,
                self.logs[item].len(),
                round,
                self.config.a,
                self.config.b,
            );
        }
        RankedList::from_vec_unchecked(top_d(&self.indices, self.d))
    }
}

impl Policy for Mucbv {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&mut self, round: u64, _rng: &mut dyn RngCore) -> RankedList {
        let list = if self.in_warmup() {
            self.warmup_list()
        } else {
            self.index_list(round)
        };
        self.pending = Some(list.clone());
        list
    }

    fn update(&mut self, feedback: &CascadeFeedback) -> Result<()> {
        check_feedback(self.pending.as_ref(), feedback)?;
        self.pending = None;
        self.observe(feedback);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_feedback, EnvironmentSpec};
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fb(list: &RankedList, clicks: &[bool]) -> CascadeFeedback {
        CascadeFeedback::from_clicks(list.clone(), clicks.to_vec()).unwrap()
    }

    #[test]
    fn radius_example() {
        // log t = 4 -> t = e^4.
        let s = 100;
        let log_t: f64 = 4.0;
        let manual = 2.0 * (0.25 * log_t / 100.0).sqrt() + 3.0 * log_t / 100.0;
        assert!((manual - 0.32).abs() < 1e-12);
        let v = 0.5 + 2.0 * (0.25 * log_t / s as f64).sqrt() + 3.0 * log_t / s as f64;
        assert!((v - 0.82).abs() < 1e-12);
        // ucb_index takes an integer round; check the formula at t = 55.
        let t = 55u64;
        let lt = (t as f64).ln();
        let expect = 0.5 + 2.0 * (0.25 * lt / 100.0).sqrt() + 3.0 * lt / 100.0;
        assert!((ucb_index(0.5, 100, t, 2.0, 3.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_keeps_small_sample_term() {
        let t = 1000u64;
        let lt = (t as f64).ln();
        let idx = ucb_index(0.2, 400, t, 2.0, 3.0);
        assert!(idx > 0.2);
        let only_b = ucb_index(0.0, 400, t, 2.0, 3.0);
        assert!((only_b - 3.0 * lt / 400.0).abs() < 1e-12);
        assert_eq!(ucb_index(1.0, 5, t, 2.0, 3.0), 1.0);
    }

    #[test]
    fn no_warmup_without_budget() {
        let mut p = Mucbv::mucbv(5, 2, PolicyConfig::default());
        assert!(!p.in_warmup());
        assert_eq!(p.warmup_rounds(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = p.recommend(1, &mut rng);
        // All indices tie at zero on the first round: first d items.
        assert_eq!(l.items(), &[0, 1]);
    }

    #[test]
    fn warmup_schedule() {
        let config = PolicyConfig {
            c_assumed: 2,
            ..Default::default()
        };
        let (k, d) = (4, 2);
        let env = EnvironmentSpec::new(vec![0.3, 0.5, 0.1, 0.7], d, 1000).unwrap();
        let mut p = Mucbv::mucbv(k, d, config);
        assert_eq!(p.warmup_rounds(), 80);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for round in 1..=80u64 {
            assert!(p.in_warmup());
            let list = p.recommend(round, &mut rng);
            let expected_first = ((round - 1) / 20) as usize;
            assert_eq!(list.items()[0], expected_first);
            let f = sample_feedback(&env, &list, &mut rng);
            p.update(&f).unwrap();
        }
        assert!(!p.in_warmup());
        assert!(p.logs().iter().all(|l| l.len() >= 20));
    }

    #[test]
    fn update_appends_examined_prefix_only() {
        let mut p = Mucbv::mucbv(6, 5, PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let list = p.recommend(1, &mut rng);
        p.update(&fb(&list, &[false, true])).unwrap();
        let grown: Vec<usize> = (0..6).filter(|&k| p.logs()[k].len() == 1).collect();
        assert_eq!(grown.len(), 2);
        assert_eq!(
            &grown[..],
            &{
                let mut v = list.items()[..2].to_vec();
                v.sort();
                v
            }[..]
        );

        let list = p.recommend(2, &mut rng);
        p.update(&fb(&list, &[false; 5])).unwrap();
        for &k in list.items() {
            assert_eq!(p.logs()[k].bits().last(), Some(&false));
        }
    }

    #[test]
    fn repeated_feedback_grows_logs_twice() {
        let mut p = Mucbv::cascade_ucbv(4, 2, PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let list = p.recommend(1, &mut rng);
        let f = fb(&list, &[false, true]);
        p.update(&f).unwrap();
        let list2 = p.recommend(2, &mut rng);
        let f2 = fb(&list2, &[false, true]);
        p.update(&f2).unwrap();
        p.observe(&f2);
        let total: usize = p.logs().iter().map(|l| l.len()).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn mismatched_feedback_is_rejected() {
        let mut p = Mucbv::mucbv(4, 2, PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let other = RankedList::new(vec![3, 2], 4).unwrap();
        assert!(matches!(
            p.update(&fb(&other, &[true])),
            Err(Error::FeedbackMismatch)
        ));
        let _ = p.recommend(1, &mut rng);
        assert!(matches!(
            p.update(&fb(&other, &[true])),
            Err(Error::FeedbackMismatch)
        ));
    }

    #[test]
    fn cold_start_and_ties() {
        let mut p = Mucbv::cascade_ucbv(5, 3, PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let list = p.recommend(10, &mut rng);
        assert_eq!(list.items(), &[0, 1, 2]);
        // Unsampled items are flagged and their index is just B ln t.
        let expected = 3.0 * 10f64.ln();
        assert!((p.last_indices()[4] - expected.min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn higher_index_first() {
        let mut p = Mucbv::cascade_ucbv(3, 2, PolicyConfig::default());
        for (k, bits) in [(0usize, 50usize), (1, 10), (2, 40)] {
            for i in 0..200 {
                p.logs[k].push(i < bits * 4);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let list = p.recommend(100, &mut rng);
        assert_eq!(list.items(), &[0, 2]);
    }
}
