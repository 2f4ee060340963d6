//! Experiment configuration.
//!
//! Config files are TOML with dotted keys, one experiment per file:
//!
//! ```toml
//! env.k = 16
//! env.mu_low = 0.1
//! env.mu_high = 0.85
//! env.d = 4
//! env.horizon = 40000
//! corruption.kind = "flip-early"
//! corruption.rate = 0.1
//! policy.kind = ["mucbv", "m2ucbv", "cascade_ucbv", "cbarbar"]
//! run.seeds = [0, 1, 2]
//! ```
//!
//! Nested tables are flattened, so `[policy]` sections work too. Unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::Value;

use crate::corruption::{budget_for_rate, AdversaryStrategy};
use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::estimators::CalibrationParams;
use crate::ingest::{click_probabilities, load_summaries, IngestConfig, RatingScale};
use crate::modelselect::ModelSelectConfig;
use crate::policies::{PolicyConfig, PolicyKind};

pub const OUT_DIR_ENV: &str = "ROBUST_CASCADE_OUT";
pub const DEFAULT_OUT_DIR: &str = "results";

const KNOWN_KEYS: &[&str] = &[
    "env.mu",
    "env.k",
    "env.mu_low",
    "env.mu_high",
    "env.ingest",
    "env.d",
    "env.horizon",
    "corruption.kind",
    "corruption.budget",
    "corruption.rate",
    "corruption.window_start",
    "corruption.window_len",
    "policy.kind",
    "policy.A",
    "policy.B",
    "policy.C_assumed",
    "policy.delta",
    "policy.lambda",
    "estimator.alpha",
    "estimator.eta",
    "estimator.max_iters",
    "modelselect.window",
    "modelselect.n_min",
    "modelselect.grid_max_exp",
    "ingest.prior_mean",
    "ingest.prior_weight",
    "ingest.sigmoid_slope",
    "ingest.sigmoid_center",
    "ingest.rating_min",
    "ingest.rating_max",
    "run.seeds",
    "run.out",
    "run.jobs",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionConfig {
    pub strategy: AdversaryStrategy,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvironmentSpec,
    pub corruption: CorruptionConfig,
    pub policies: Vec<PolicyKind>,
    pub policy: PolicyConfig,
    pub modelselect: ModelSelectConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Config with library defaults: every policy, no corruption, seeds 0..10.
    pub fn new(env: EnvironmentSpec) -> Self {
        Self {
            env,
            corruption: CorruptionConfig {
                strategy: AdversaryStrategy::None,
                budget: 0,
            },
            policies: PolicyKind::ALL.to_vec(),
            policy: PolicyConfig::default(),
            modelselect: ModelSelectConfig::default(),
            seeds: (0..10).collect(),
            out: default_out_dir(),
            jobs: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &Value::Table(table), &mut flat);
        for key in flat.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }
        let keys = Keys(flat);

        let env = build_env(&keys, base_dir)?;
        let mut config = Self::new(env);

        config.policy = PolicyConfig {
            a: keys.f64("policy.A")?.unwrap_or(config.policy.a),
            b: keys.f64("policy.B")?.unwrap_or(config.policy.b),
            c_assumed: keys.u64("policy.C_assumed")?.unwrap_or(0),
            delta: keys.f64("policy.delta")?.unwrap_or(config.policy.delta),
            lambda: keys.f64("policy.lambda")?,
            estimator: CalibrationParams {
                alpha: keys
                    .f64("estimator.alpha")?
                    .unwrap_or(config.policy.estimator.alpha),
                eta: keys
                    .f64("estimator.eta")?
                    .unwrap_or(config.policy.estimator.eta),
                max_iters: keys
                    .u64("estimator.max_iters")?
                    .map(|n| n as u32)
                    .unwrap_or(config.policy.estimator.max_iters),
                partition_seed: 0,
            },
        };
        if let Some(kinds) = keys.strings("policy.kind")? {
            config.policies = kinds
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<PolicyKind>>>()?;
        }
        config.modelselect = ModelSelectConfig {
            window: keys.u64("modelselect.window")?,
            n_min: keys.u64("modelselect.n_min")?,
            grid_max_exp: keys.u64("modelselect.grid_max_exp")?.map(|e| e as u32),
        };
        config.corruption = build_corruption(&keys, config.env.horizon())?;
        if let Some(seeds) = keys.u64_list("run.seeds")? {
            config.seeds = seeds;
        }
        if let Some(out) = keys.string("run.out")? {
            config.out = base_dir.join(out);
        }
        config.jobs = keys.u64("run.jobs")?.map(|j| j as usize);
        config.validate()?;
        Ok(config)
    }

    /// Sets the budget from a fraction of the horizon; a zero budget disables
    /// the adversary, a positive one defaults to flip-early.
    pub fn set_corruption_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "corruption rate must lie in [0, 1], got {rate}"
            )));
        }
        self.corruption.budget = budget_for_rate(rate, self.env.horizon());
        if self.corruption.budget == 0 {
            self.corruption.strategy = AdversaryStrategy::None;
        } else if self.corruption.strategy == AdversaryStrategy::None {
            self.corruption.strategy = AdversaryStrategy::FlipEarly;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        let mut sorted = self.policies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.policies.len() {
            return Err(Error::Config("duplicate policy kind".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("duplicate seed".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("run.jobs must be at least 1".into()));
        }
        if let AdversaryStrategy::FlipWindow { start, .. } = self.corruption.strategy {
            if start == 0 {
                return Err(Error::Config("corruption.window_start is 1-based".into()));
            }
        }
        if self.policies.contains(&PolicyKind::Mucbv) {
            let demand = 10u64
                .saturating_mul(self.env.num_items() as u64)
                .saturating_mul(self.policy.c_assumed);
            if self.env.horizon() < demand {
                return Err(Error::Config(format!(
                    "horizon {} is shorter than the warm-up of {demand} rounds for C_assumed = {}",
                    self.env.horizon(),
                    self.policy.c_assumed
                )));
            }
        }
        Ok(())
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn build_env(keys: &Keys, base_dir: &Path) -> Result<EnvironmentSpec> {
    let d = keys
        .u64("env.d")?
        .ok_or_else(|| Error::Config("missing `env.d`".into()))? as usize;
    let horizon = keys
        .u64("env.horizon")?
        .ok_or_else(|| Error::Config("missing `env.horizon`".into()))?;
    let sources = ["env.mu", "env.k", "env.ingest"]
        .iter()
        .filter(|k| keys.0.contains_key(**k))
        .count();
    if sources != 1 {
        return Err(Error::Config(
            "exactly one of `env.mu`, `env.k` or `env.ingest` must be set".into(),
        ));
    }
    if let Some(mu) = keys.f64_list("env.mu")? {
        return EnvironmentSpec::new(mu, d, horizon);
    }
    if let Some(k) = keys.u64("env.k")? {
        let low = keys.f64("env.mu_low")?.unwrap_or(0.1);
        let high = keys.f64("env.mu_high")?.unwrap_or(0.85);
        return EnvironmentSpec::linspace(low, high, k as usize, d, horizon);
    }
    let path = base_dir.join(keys.string("env.ingest")?.unwrap_or_default());
    let ingest = IngestConfig {
        prior_mean: keys.f64("ingest.prior_mean")?,
        prior_weight: keys.f64("ingest.prior_weight")?,
        sigmoid_slope: keys.f64("ingest.sigmoid_slope")?.unwrap_or(1.5),
        sigmoid_center: keys.f64("ingest.sigmoid_center")?,
        scale: RatingScale {
            min: keys.f64("ingest.rating_min")?.unwrap_or(1.0),
            max: keys.f64("ingest.rating_max")?.unwrap_or(5.0),
        },
    };
    let summaries = load_summaries(&path, ingest.scale)?;
    let mu = click_probabilities(&summaries, &ingest)?
        .into_iter()
        .map(|a| a.click_prob)
        .collect();
    EnvironmentSpec::new(mu, d, horizon)
}

fn build_corruption(keys: &Keys, horizon: u64) -> Result<CorruptionConfig> {
    let budget = match (keys.u64("corruption.budget")?, keys.f64("corruption.rate")?) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "set at most one of `corruption.budget` and `corruption.rate`".into(),
            ))
        }
        (Some(b), None) => b,
        (None, Some(r)) => {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!(
                    "corruption.rate must lie in [0, 1], got {r}"
                )));
            }
            budget_for_rate(r, horizon)
        }
        (None, None) => 0,
    };
    let mut strategy = match keys.string("corruption.kind")? {
        Some(kind) => kind.parse()?,
        None if budget > 0 => AdversaryStrategy::FlipEarly,
        None => AdversaryStrategy::None,
    };
    let start = keys.u64("corruption.window_start")?;
    let len = keys.u64("corruption.window_len")?;
    match &mut strategy {
        AdversaryStrategy::FlipWindow { start: s, len: l } => {
            *s = start.unwrap_or(1);
            *l = len.unwrap_or(budget);
        }
        _ if start.is_some() || len.is_some() => {
            return Err(Error::Config(
                "window bounds need `corruption.kind = \"flip-window\"`".into(),
            ))
        }
        _ => {}
    }
    Ok(CorruptionConfig { strategy, budget })
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, Value>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn bad(key: &str, want: &str) -> Error {
        Error::Config(format!("`{key}` must be {want}"))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.0
            .get(key)
            .map(|v| as_f64(v).ok_or_else(|| Self::bad(key, "a number")))
            .transpose()
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.0
            .get(key)
            .map(|v| as_u64(v).ok_or_else(|| Self::bad(key, "a non-negative integer")))
            .transpose()
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        self.0
            .get(key)
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Self::bad(key, "a string"))
            })
            .transpose()
    }

    /// A string or an array of strings.
    fn strings(&self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(v) = self.0.get(key) else {
            return Ok(None);
        };
        let err = || Self::bad(key, "a string or an array of strings");
        match v {
            Value::String(s) => Ok(Some(vec![s.clone()])),
            Value::Array(items) => items
                .iter()
                .map(|i| i.as_str().map(str::to_string).ok_or_else(err))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            _ => Err(err()),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key, as_f64, "an array of numbers")
    }

    fn u64_list(&self, key: &str) -> Result<Option<Vec<u64>>> {
        self.list(key, as_u64, "an array of non-negative integers")
    }

    fn list<T>(&self, key: &str, f: fn(&Value) -> Option<T>, want: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.0.get(key) else {
            return Ok(None);
        };
        v.as_array()
            .and_then(|items| items.iter().map(f).collect::<Option<Vec<T>>>())
            .map(Some)
            .ok_or_else(|| Self::bad(key, want))
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}
