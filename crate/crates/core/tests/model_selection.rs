use robust_cascade::corruption::{corrupt, AdversaryStrategy, CorruptionBudget};
use robust_cascade::env::{sample_feedback, EnvironmentSpec};
use robust_cascade::modelselect::{M2ucbv, ModelSelectConfig};
use robust_cascade::policies::{Policy, PolicyConfig};
use robust_cascade::rng::RunRng;

/// Runs the wrapper on the 16-item synthetic instance and returns it.
fn run_wrapper(seed: u64, budget: u64, horizon: u64, check_every_round: bool) -> M2ucbv {
    let env = EnvironmentSpec::linspace(0.1, 0.85, 16, 4, horizon).unwrap();
    let mut rng = RunRng::new(seed);
    let config = PolicyConfig {
        estimator: PolicyConfig::default()
            .estimator
            .with_partition_seed(rng.partition_seed()),
        ..PolicyConfig::default()
    };
    let mut policy = M2ucbv::new(16, 4, horizon, config, ModelSelectConfig::default());
    let strategy = if budget > 0 {
        AdversaryStrategy::FlipEarly
    } else {
        AdversaryStrategy::None
    };
    let mut spend = CorruptionBudget::new(budget);
    let mut alive_before: Vec<bool> = policy.stats().iter().map(|s| s.alive).collect();
    for round in 1..=horizon {
        let list = policy.recommend(round, &mut rng.policy);
        let acting = *policy.acting_log().last().unwrap();
        assert!(policy.stats()[acting].alive);
        let fb = corrupt(
            sample_feedback(&env, &list, &mut rng.env),
            round,
            &mut spend,
            &strategy,
        );
        policy.update(&fb).unwrap();
        if check_every_round {
            let alive: Vec<bool> = policy.stats().iter().map(|s| s.alive).collect();
            assert!(alive.iter().zip(&alive_before).all(|(now, was)| !now | was));
            assert!(alive.iter().any(|&a| a));
            let survivors: Vec<_> = policy
                .instances()
                .iter()
                .zip(policy.stats())
                .filter(|(_, s)| s.alive)
                .map(|(i, _)| i.logs())
                .collect();
            assert!(survivors.windows(2).all(|w| w[0] == w[1]));
            alive_before = alive;
        }
    }
    policy
}

#[test]
fn survivors_shrink_and_share_logs() {
    let policy = run_wrapper(3, 500, 6_000, true);
    let total: u64 = policy.stats().iter().map(|s| s.rounds).sum();
    assert_eq!(total, 6_000);
}

#[test]
fn zero_budget_instance_survives_without_corruption() {
    let kept = (0..10)
        .filter(|&seed| run_wrapper(seed, 0, 40_000, false).stats()[0].alive)
        .count();
    assert!(kept >= 9, "C = 0 instance survived in {kept}/10 seeds");
}

/// Under 1000 flip-early corruptions the median assumed budget of the final
/// survivors should land within a factor 4 of 1000 in most seeds.
///
/// Fails: with 18 instances sharing 40000 rounds each acts about 2200 times,
/// and Hoeffding widths near 0.1 per side are too wide to separate reward
/// gaps of about 0.1, so no instance is ever eliminated.
#[test]
fn survivors_track_true_corruption() {
    let mut medians = Vec::new();
    for seed in 0..10 {
        let policy = run_wrapper(seed, 1_000, 40_000, false);
        let mut budgets: Vec<f64> = policy.alive().map(|s| s.assumed_budget as f64).collect();
        budgets.sort_by(f64::total_cmp);
        let n = budgets.len();
        let median = if n % 2 == 1 {
            budgets[n / 2]
        } else {
            0.5 * (budgets[n / 2 - 1] + budgets[n / 2])
        };
        medians.push(median);
    }
    let close = medians
        .iter()
        .filter(|&&m| (250.0..=4_000.0).contains(&m))
        .count();
    assert!(close >= 7, "survivor median budgets {medians:?}");
}
