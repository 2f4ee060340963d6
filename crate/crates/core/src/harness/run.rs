use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::summary::{summarize, write_summary};
use crate::corruption::{corrupt, AdversaryStrategy, CorruptionBudget};
use crate::env::{expected_reward, optimal_list, sample_feedback, EnvironmentSpec, RankedList};
use crate::error::{Error, Result};
use crate::modelselect::M2ucbv;
use crate::policies::{CascadeCbarbar, Mucbv, Policy, PolicyConfig, PolicyKind};
use crate::rng::RunRng;

pub const TRACE_HEADER: [&str; 7] = [
    "round",
    "policy",
    "seed",
    "chosen_list",
    "per_round_regret",
    "cumulative_regret",
    "corruption_spent",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: u64,
    pub chosen_list: String,
    pub per_round_regret: f64,
    pub cumulative_regret: f64,
    /// Budget spent up to and including this round.
    pub corruption_spent: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub policy: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn horizon(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.round)
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_regret)
    }

    pub fn corruption_spent(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.corruption_spent)
    }

    /// Cumulative regret after `round` rounds.
    pub fn regret_at(&self, round: u64) -> Option<f64> {
        let i = usize::try_from(round).ok()?.checked_sub(1)?;
        self.rows.get(i).map(|r| r.cumulative_regret)
    }

    pub fn file_name(&self) -> String {
        trace_file_name(&self.policy, self.seed)
    }
}

pub fn trace_file_name(policy: &str, seed: u64) -> String {
    format!("trace_{policy}_seed{seed}.csv")
}

pub fn build_policy(
    kind: PolicyKind,
    config: &ExperimentConfig,
    partition_seed: u64,
) -> Box<dyn Policy> {
    let env = &config.env;
    let policy = PolicyConfig {
        estimator: config.policy.estimator.with_partition_seed(partition_seed),
        ..config.policy
    };
    let (k, d) = (env.num_items(), env.list_size());
    match kind {
        PolicyKind::Mucbv => Box::new(Mucbv::mucbv(k, d, policy)),
        PolicyKind::CascadeUcbv => Box::new(Mucbv::cascade_ucbv(k, d, policy)),
        PolicyKind::M2ucbv => {
            Box::new(M2ucbv::new(k, d, env.horizon(), policy, config.modelselect))
        }
        PolicyKind::Cbarbar => Box::new(CascadeCbarbar::new(k, d, env.horizon(), &policy)),
    }
}

/// Plays `policy` for the full horizon. The environment draws from the env
/// stream, the policy from the policy stream; regret is under true means.
pub fn simulate(
    env: &EnvironmentSpec,
    policy: &mut dyn Policy,
    strategy: &AdversaryStrategy,
    budget: u64,
    rng: &mut RunRng,
) -> Result<Vec<TraceRow>> {
    let best = expected_reward(&optimal_list(env.mu(), env.list_size())?, env.mu())?;
    let mut budget = CorruptionBudget::new(budget);
    let mut cumulative = 0.0;
    let mut rows = Vec::with_capacity(env.horizon() as usize);
    for round in 1..=env.horizon() {
        let list = policy.recommend(round, &mut rng.policy);
        check_list(&list, env)?;
        let regret = (best - expected_reward(&list, env.mu())?).max(0.0);
        cumulative += regret;
        let feedback = sample_feedback(env, &list, &mut rng.env);
        let feedback = corrupt(feedback, round, &mut budget, strategy);
        policy.update(&feedback)?;
        rows.push(TraceRow {
            round,
            chosen_list: list.to_string(),
            per_round_regret: regret,
            cumulative_regret: cumulative,
            corruption_spent: budget.spent(),
        });
    }
    Ok(rows)
}

fn check_list(list: &RankedList, env: &EnvironmentSpec) -> Result<()> {
    RankedList::for_env(list.items().to_vec(), env).map(|_| ())
}

/// One (policy, seed) run. Does not touch the filesystem.
pub fn run_single(config: &ExperimentConfig, kind: PolicyKind, seed: u64) -> Result<RunTrace> {
    let mut rng = RunRng::new(seed);
    let mut policy = build_policy(kind, config, rng.partition_seed());
    let rows = simulate(
        &config.env,
        policy.as_mut(),
        &config.corruption.strategy,
        config.corruption.budget,
        &mut rng,
    )?;
    Ok(RunTrace {
        policy: kind.as_str().to_string(),
        seed,
        rows,
    })
}

/// Runs every (policy, seed) pair in parallel, in policy-major order.
pub fn run_all(config: &ExperimentConfig) -> Result<Vec<RunTrace>> {
    config.validate()?;
    let pairs: Vec<(PolicyKind, u64)> = config
        .policies
        .iter()
        .flat_map(|&k| config.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let work = || {
        pairs
            .par_iter()
            .map(|&(k, s)| run_single(config, k, s))
            .collect::<Result<Vec<_>>>()
    };
    match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Runs the experiment and writes one trace CSV per run plus `summary.csv`
/// into `config.out`. Returns the paths written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let traces = run_all(config)?;
    fs::create_dir_all(&config.out)?;
    let mut written = Vec::with_capacity(traces.len() + 1);
    for trace in &traces {
        let path = config.out.join(trace.file_name());
        write_trace(&path, trace)?;
        written.push(path);
    }
    let path = config.out.join("summary.csv");
    write_summary(&path, &summarize(&traces)?)?;
    written.push(path);
    Ok(written)
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(TRACE_HEADER)?;
    let seed = trace.seed.to_string();
    for row in &trace.rows {
        w.write_record([
            row.round.to_string().as_str(),
            &trace.policy,
            &seed,
            &row.chosen_list,
            &row.per_round_regret.to_string(),
            &row.cumulative_regret.to_string(),
            &row.corruption_spent.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<RunTrace> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(TRACE_HEADER) {
        return Err(err(
            1,
            format!("expected header `{}`", TRACE_HEADER.join(",")),
        ));
    }
    let mut trace: Option<RunTrace> = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| err(line, format!("`{}` is not a number", field(i))))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse()
                .map_err(|_| err(line, format!("`{}` is not an integer", field(i))))
        };
        let seed = int(2)?;
        let t = trace.get_or_insert_with(|| RunTrace {
            policy: field(1).to_string(),
            seed,
            rows: Vec::new(),
        });
        if t.policy != field(1) || t.seed != seed {
            return Err(err(line, "trace mixes runs".into()));
        }
        t.rows.push(TraceRow {
            round: int(0)?,
            chosen_list: field(3).to_string(),
            per_round_regret: num(4)?,
            cumulative_regret: num(5)?,
            corruption_spent: int(6)?,
        });
    }
    trace.ok_or_else(|| err(1, "trace has no rows".into()))
}

/// Reads every `trace_*.csv` in `dir`, sorted by file name.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<RunTrace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("trace_") && n.ends_with(".csv"))
    });
    paths.sort();
    paths.iter().map(|p| read_trace(p)).collect()
}
