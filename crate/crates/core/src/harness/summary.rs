use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::run::RunTrace;
use crate::error::{Error, Result};

/// Final cumulative regret statistics for one policy across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub horizon: u64,
    pub policies: Vec<PolicySummary>,
}

impl Summary {
    pub fn get(&self, policy: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    /// Improvement of `ours` over `other` in percent, on mean final regret.
    pub fn improvement(&self, ours: &str, other: &str) -> Option<f64> {
        Some(improvement_pct(self.get(ours)?.mean, self.get(other)?.mean))
    }
}

/// `(other - ours) / other` in percent. Zero when both are zero.
pub fn improvement_pct(ours: f64, other: f64) -> f64 {
    if other == ours {
        0.0
    } else {
        100.0 * (other - ours) / other
    }
}

pub fn summarize(traces: &[RunTrace]) -> Result<Summary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to summarize".into()))?;
    let horizon = first.horizon();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in traces {
        if t.horizon() != horizon {
            return Err(Error::HorizonMismatch(format!(
                "{} ({} rounds) vs {} ({} rounds)",
                t.file_name(),
                t.horizon(),
                first.file_name(),
                horizon
            )));
        }
        groups.entry(&t.policy).or_default().push(t.final_regret());
    }
    let policies = groups
        .into_iter()
        .map(|(policy, mut finals)| {
            finals.sort_by(f64::total_cmp);
            let n = finals.len();
            let median = if n % 2 == 1 {
                finals[n / 2]
            } else {
                0.5 * (finals[n / 2 - 1] + finals[n / 2])
            };
            PolicySummary {
                policy: policy.to_string(),
                runs: n,
                mean: finals.iter().sum::<f64>() / n as f64,
                median,
                min: finals[0],
                max: finals[n - 1],
            }
        })
        .collect();
    Ok(Summary { horizon, policies })
}

/// One row per policy, with a `vs_<other>` improvement column per other policy.
pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec![
        "policy".to_string(),
        "runs".into(),
        "horizon".into(),
        "mean_final_regret".into(),
        "median_final_regret".into(),
        "min_final_regret".into(),
        "max_final_regret".into(),
    ];
    header.extend(summary.policies.iter().map(|p| format!("vs_{}", p.policy)));
    w.write_record(&header)?;
    for p in &summary.policies {
        let mut row = vec![
            p.policy.clone(),
            p.runs.to_string(),
            summary.horizon.to_string(),
            p.mean.to_string(),
            p.median.to_string(),
            p.min.to_string(),
            p.max.to_string(),
        ];
        row.extend(
            summary
                .policies
                .iter()
                .map(|o| improvement_pct(p.mean, o.mean).to_string()),
        );
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::TraceRow;

    fn trace(policy: &str, seed: u64, finals: &[f64]) -> RunTrace {
        RunTrace {
            policy: policy.into(),
            seed,
            rows: finals
                .iter()
                .enumerate()
                .map(|(i, &c)| TraceRow {
                    round: i as u64 + 1,
                    chosen_list: "0".into(),
                    per_round_regret: 0.0,
                    cumulative_regret: c,
                    corruption_spent: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn single_trace() {
        let s = summarize(&[trace("a", 0, &[1.0, 2.5])]).unwrap();
        let p = s.get("a").unwrap();
        assert_eq!((p.mean, p.median, p.min, p.max), (2.5, 2.5, 2.5, 2.5));
        assert_eq!(s.horizon, 2);
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_pct(10.0, 400.0) - 97.5).abs() < 1e-12);
        assert_eq!(improvement_pct(7.0, 7.0), 0.0);
        assert_eq!(improvement_pct(0.0, 0.0), 0.0);
        let s = summarize(&[trace("a", 0, &[10.0]), trace("b", 0, &[400.0])]).unwrap();
        assert!((s.improvement("a", "b").unwrap() - 97.5).abs() < 1e-12);
    }

    #[test]
    fn statistics_across_seeds() {
        let traces: Vec<RunTrace> = [4.0, 1.0, 3.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &f)| trace("a", i as u64, &[f]))
            .collect();
        let p = summarize(&traces).unwrap().policies.remove(0);
        assert_eq!(
            (p.runs, p.mean, p.median, p.min, p.max),
            (4, 2.5, 2.5, 1.0, 4.0)
        );
    }

    #[test]
    fn horizon_mismatch() {
        let e = summarize(&[trace("a", 0, &[1.0]), trace("b", 0, &[1.0, 2.0])]).unwrap_err();
        assert!(matches!(e, Error::HorizonMismatch(_)));
        assert!(summarize(&[]).is_err());
    }
}
