//! Experiment orchestration: config parsing, multi-seed runs, trace CSVs,
//! summaries, corruption sweeps and the calibration report.
//!
//! Runs are parallel across (policy, seed) pairs only. Each run owns its RNG
//! streams, so batch and single runs produce identical traces.

mod config;
mod run;
mod summary;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

pub use config::{
    default_out_dir, CorruptionConfig, ExperimentConfig, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use run::{
    build_policy, read_trace, read_trace_dir, run_all, run_experiment, run_single, simulate,
    trace_file_name, write_trace, RunTrace, TraceRow, TRACE_HEADER,
};
pub use summary::{improvement_pct, summarize, write_summary, PolicySummary, Summary};

use crate::error::{Error, Result};
use crate::estimators::{calibrate, q_b, CalibrationParams};

/// Default corruption rates for `sweep`.
pub const SWEEP_RATES: [f64; 6] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub rate: f64,
    pub budget: u64,
    pub summary: Summary,
}

/// Runs `config` once per corruption rate. Each rate writes its traces and
/// summary under `out/rate_<rate>/`; `out/sweep.csv` collects the means.
pub fn sweep(config: &ExperimentConfig, rates: &[f64]) -> Result<Vec<SweepPoint>> {
    if rates.is_empty() {
        return Err(Error::InvalidArgument("no corruption rates given".into()));
    }
    let mut configs = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut c = config.clone();
        c.set_corruption_rate(rate)?;
        c.out = config.out.join(format!("rate_{rate}"));
        c.validate()?;
        configs.push((rate, c));
    }
    let mut points = Vec::with_capacity(configs.len());
    for (rate, c) in &configs {
        run_experiment(c)?;
        let summary = summarize(&read_trace_dir(&c.out)?)?;
        points.push(SweepPoint {
            rate: *rate,
            budget: c.corruption.budget,
            summary,
        });
    }
    let path: PathBuf = config.out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record([
        "rate",
        "budget",
        "policy",
        "mean_final_regret",
        "median_final_regret",
    ])?;
    for p in &points {
        for s in &p.summary.policies {
            w.write_record([
                p.rate.to_string(),
                p.budget.to_string(),
                s.policy.clone(),
                s.mean.to_string(),
                s.median.to_string(),
            ])?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub b: usize,
    /// Largest `|q_b(calibrate(b, q_b(p))) - q_b(p)|` over the grid.
    pub max_roundtrip_error: f64,
    /// Largest `q(1-q) - p(1-p)` over the grid; at most zero up to rounding.
    pub max_variance_excess: f64,
}

/// Round-trip report for `q_b` and `calibrate` over odd `b` in `bs` and the
/// grid `p = i / (points + 1)`, `i = 1..=points`.
pub fn calibration_report(
    bs: impl IntoIterator<Item = usize>,
    points: usize,
    params: &CalibrationParams,
) -> Result<Vec<CalibrationRow>> {
    let grid: Vec<f64> = (1..=points)
        .map(|i| i as f64 / (points + 1) as f64)
        .collect();
    bs.into_iter()
        .map(|b| {
            let mut row = CalibrationRow {
                b,
                max_roundtrip_error: 0.0,
                max_variance_excess: f64::NEG_INFINITY,
            };
            for &p in &grid {
                let y = q_b(b, p)?;
                let err = (q_b(b, calibrate(b, y, params)?)? - y).abs();
                row.max_roundtrip_error = row.max_roundtrip_error.max(err);
                row.max_variance_excess =
                    row.max_variance_excess.max(y * (1.0 - y) - p * (1.0 - p));
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvironmentSpec;

    #[test]
    fn report_within_tolerance() {
        let params = CalibrationParams::default();
        let rows = calibration_report((3..=31).step_by(2), 99, &params).unwrap();
        assert_eq!(rows.len(), 15);
        let tol = params.eta + 0.5f64.powi(params.max_iters as i32);
        for r in rows {
            assert!(r.max_roundtrip_error <= tol, "{r:?}");
            assert!(r.max_variance_excess <= 1e-12, "{r:?}");
        }
        assert!(calibration_report([4], 9, &params).is_err());
    }

    #[test]
    fn sweep_writes_one_dir_per_rate() {
        let dir = tempfile::tempdir().unwrap();
        let env = EnvironmentSpec::linspace(0.1, 0.8, 5, 2, 200).unwrap();
        let mut c = ExperimentConfig::new(env);
        c.seeds = vec![0, 1];
        c.policies = vec![crate::policies::PolicyKind::CascadeUcbv];
        c.out = dir.path().to_path_buf();
        let points = sweep(&c, &[0.0, 0.1]).unwrap();
        assert_eq!(points[1].budget, 20);
        assert!(dir
            .path()
            .join("rate_0.1/trace_cascade_ucbv_seed1.csv")
            .exists());
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
