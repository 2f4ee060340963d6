use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_cascade::env::{sample_feedback, CascadeFeedback, EnvironmentSpec, RankedList};
use robust_cascade::policies::{CascadeCbarbar, Mucbv, Policy, PolicyConfig};
use robust_cascade::rng::RunRng;

fn with_budget(c: u64) -> PolicyConfig {
    PolicyConfig {
        c_assumed: c,
        ..PolicyConfig::default()
    }
}

#[test]
fn warmup_accounting() {
    for (k, d, c) in [(4usize, 2usize, 3u64), (9, 4, 1), (6, 6, 2)] {
        let env = EnvironmentSpec::linspace(0.1, 0.7, k, d, 10_000).unwrap();
        let mut policy = Mucbv::mucbv(k, d, with_budget(c));
        let mut rng = RunRng::new(c);
        let mut rounds = 0;
        while policy.in_warmup() {
            rounds += 1;
            let list = policy.recommend(rounds, &mut rng.policy);
            let fb = sample_feedback(&env, &list, &mut rng.env);
            policy.update(&fb).unwrap();
        }
        assert_eq!(rounds, 10 * k as u64 * c);
        assert_eq!(rounds, policy.warmup_rounds());
        for log in policy.logs() {
            assert!(log.len() as u64 >= 10 * c);
        }
    }
}

/// Fraction of (item, round) pairs with at least 50 samples where the index
/// falls below the true mean, over 20 uncorrupted runs.
fn optimism_violations(estimator: fn(usize, usize, PolicyConfig) -> Mucbv) -> f64 {
    let env = EnvironmentSpec::linspace(0.1, 0.85, 16, 4, 10_000).unwrap();
    let (mut below, mut total) = (0u64, 0u64);
    for seed in 0..20 {
        let mut rng = RunRng::new(seed);
        let config = PolicyConfig {
            estimator: PolicyConfig::default()
                .estimator
                .with_partition_seed(rng.partition_seed()),
            ..PolicyConfig::default()
        };
        let mut policy = estimator(16, 4, config);
        for round in 1..=env.horizon() {
            let list = policy.recommend(round, &mut rng.policy);
            for (k, &index) in policy.last_indices().iter().enumerate() {
                if policy.logs()[k].len() >= 50 {
                    total += 1;
                    below += (env.mu()[k] > index) as u64;
                }
            }
            let fb = sample_feedback(&env, &list, &mut rng.env);
            policy.update(&fb).unwrap();
        }
    }
    below as f64 / total as f64
}

/// Fails: once logs pass a few hundred samples the calibrated estimate snaps
/// to 0.25 or 0.75, and the shrinking radius no longer covers items whose
/// mean sits above the snapped value.
#[test]
fn mucbv_indices_stay_optimistic() {
    let frac = optimism_violations(Mucbv::mucbv);
    assert!(frac < 0.05, "index below true mean in {frac:.4} of pairs");
}

#[test]
fn cascade_ucbv_indices_stay_optimistic() {
    let frac = optimism_violations(Mucbv::cascade_ucbv);
    assert!(frac < 0.05, "index below true mean in {frac:.4} of pairs");
}

fn feedback_for(list: &RankedList, stop: usize) -> CascadeFeedback {
    let d = list.len();
    let clicks: Vec<bool> = (0..stop.min(d)).map(|i| i + 1 == stop).collect();
    CascadeFeedback::from_clicks(list.clone(), clicks).unwrap()
}

proptest! {
    #[test]
    fn updates_touch_only_the_examined_prefix(stops in prop::collection::vec(1usize..=4, 1..60), seed in any::<u64>()) {
        let mut policy = Mucbv::mucbv(8, 3, PolicyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, stop) in stops.into_iter().enumerate() {
            let list = policy.recommend(t as u64 + 1, &mut rng);
            let before: Vec<usize> = policy.logs().iter().map(|l| l.len()).collect();
            let fb = feedback_for(&list, stop);
            policy.update(&fb).unwrap();
            let examined: Vec<usize> = list.items()[..fb.clicks().len()].to_vec();
            for (k, log) in policy.logs().iter().enumerate() {
                let grew = log.len() - before[k];
                prop_assert_eq!(grew, examined.contains(&k) as usize);
            }
        }
    }

    #[test]
    fn cbarbar_epochs_follow_schedule(seed in 0u64..1000, k in 3usize..7, d in 1usize..3) {
        let env = EnvironmentSpec::linspace(0.15, 0.75, k, d, 3000).unwrap();
        let config = PolicyConfig { lambda: Some(2.0), ..PolicyConfig::default() };
        let mut policy = CascadeCbarbar::new(k, d, env.horizon(), &config);
        let mut rng = RunRng::new(seed);
        for round in 1..=env.horizon() {
            let list = policy.recommend(round, &mut rng.policy);
            prop_assert_eq!(list.len(), d);
            let fb = sample_feedback(&env, &list, &mut rng.env);
            policy.update(&fb).unwrap();
        }
        prop_assert!(policy.history().len() >= 2);
        for rec in policy.history() {
            prop_assert_eq!(rec.realized_length, rec.planned_length);
            let floor = 2f64.powf(-(rec.epoch as f64) / 4.0);
            for (b, a) in rec.gaps_before.iter().zip(&rec.gaps_after) {
                prop_assert!(*a >= floor.max(b / 2.0));
                prop_assert!(*a <= 1.0);
            }
        }
    }
}
