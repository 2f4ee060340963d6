use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use robust_cascade::estimators::CalibrationParams;
use robust_cascade::harness::{
    calibration_report, read_trace_dir, run_experiment, summarize, sweep, write_summary,
    ExperimentConfig, Summary, OUT_DIR_ENV, SWEEP_RATES,
};
use robust_cascade::ingest::{click_probabilities, load_summaries, IngestConfig, RatingScale};

#[derive(Parser)]
#[command(
    name = "robust-cascade",
    version,
    about = "Corruption-robust cascading bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (policy, seed) pair of an experiment and write traces plus a summary.
    Run {
        /// Experiment config file (same as --config).
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Summarize the trace CSVs in a directory into summary.csv.
    Summarize { dir: PathBuf },
    /// Convert a rating-summary CSV into click probabilities.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        prior_mean: Option<f64>,
        #[arg(long)]
        prior_weight: Option<f64>,
        #[arg(long, default_value_t = 1.5)]
        sigmoid_slope: f64,
        #[arg(long)]
        sigmoid_center: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        rating_min: f64,
        #[arg(long, default_value_t = 5.0)]
        rating_max: f64,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Report the round-trip error of the majority map and its inverse.
    CheckCalibration {
        #[arg(long, default_value_t = 31)]
        max_b: usize,
        #[arg(long, default_value_t = 99)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        eta: f64,
        #[arg(long, default_value_t = 60)]
        max_iters: u32,
    },
    /// Repeat an experiment across corruption rates.
    Sweep {
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
        /// Comma-separated corruption rates as fractions of the horizon.
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_RATES)]
        corruption: Vec<f64>,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as a list and/or ranges, e.g. `0,3,5-9`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Corruption budget as a fraction of the horizon; flip-early unless the config sets a kind.
    #[arg(long)]
    corruption_rate: Option<f64>,
}

impl RunOpts {
    fn load(&self, positional: Option<&PathBuf>) -> Result<ExperimentConfig> {
        let path = match (positional, &self.config) {
            (Some(_), Some(_)) => bail!("give the config either positionally or with --config"),
            (Some(p), None) | (None, Some(p)) => p,
            (None, None) => bail!("no config file given"),
        };
        let mut config = ExperimentConfig::from_file(path)
            .with_context(|| format!("loading {}", path.display()))?;
        if let Some(seeds) = &self.seeds {
            config.seeds = parse_seeds(seeds)?;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
        if let Some(rate) = self.corruption_rate {
            config.set_corruption_rate(rate)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty seed range `{part}`");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds in `{text}`");
    }
    Ok(seeds)
}

fn print_summary(summary: &Summary) {
    println!("final cumulative regret after {} rounds", summary.horizon);
    println!(
        "{:<14} {:>5} {:>12} {:>12} {:>12} {:>12}",
        "policy", "runs", "mean", "median", "min", "max"
    );
    for p in &summary.policies {
        println!(
            "{:<14} {:>5} {:>12.2} {:>12.2} {:>12.2} {:>12.2}",
            p.policy, p.runs, p.mean, p.median, p.min, p.max
        );
    }
    for a in &summary.policies {
        for b in summary.policies.iter().filter(|b| b.policy != a.policy) {
            if let Some(pct) = summary.improvement(&a.policy, &b.policy) {
                println!("{} vs {}: {pct:.2}%", a.policy, b.policy);
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, opts } => {
            let config = opts.load(config.as_ref())?;
            let written = run_experiment(&config)?;
            let summary = summarize(&read_trace_dir(&config.out)?)?;
            print_summary(&summary);
            println!("wrote {} files to {}", written.len(), config.out.display());
        }
        Command::Summarize { dir } => {
            let summary = summarize(&read_trace_dir(&dir)?)?;
            write_summary(&dir.join("summary.csv"), &summary)?;
            print_summary(&summary);
        }
        Command::Ingest {
            csv,
            prior_mean,
            prior_weight,
            sigmoid_slope,
            sigmoid_center,
            rating_min,
            rating_max,
            output,
        } => {
            let scale = RatingScale {
                min: rating_min,
                max: rating_max,
            };
            let config = IngestConfig {
                prior_mean,
                prior_weight,
                sigmoid_slope,
                sigmoid_center,
                scale,
            };
            let arms = click_probabilities(&load_summaries(&csv, scale)?, &config)?;
            let sink: Box<dyn Write> = match &output {
                Some(p) => Box::new(std::fs::File::create(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut w = ::csv::Writer::from_writer(sink);
            w.write_record(["item_id", "bayes_rating", "click_prob"])?;
            for a in &arms {
                w.write_record([
                    a.item_id.clone(),
                    a.bayes_rating.to_string(),
                    a.click_prob.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Command::CheckCalibration {
            max_b,
            points,
            eta,
            max_iters,
        } => {
            let params = CalibrationParams {
                eta,
                max_iters,
                ..CalibrationParams::default()
            };
            params.validate()?;
            let tol = eta + 2f64.powi(-(max_iters as i32));
            let rows = calibration_report((3..=max_b).step_by(2), points, &params)?;
            println!(
                "{:>4} {:>14} {:>16}",
                "b", "roundtrip_err", "variance_excess"
            );
            let mut ok = true;
            for r in &rows {
                let pass = r.max_roundtrip_error <= tol && r.max_variance_excess <= 1e-12;
                ok &= pass;
                println!(
                    "{:>4} {:>14.3e} {:>16.3e}{}",
                    r.b,
                    r.max_roundtrip_error,
                    r.max_variance_excess,
                    if pass { "" } else { "  FAIL" }
                );
            }
            println!(
                "tolerance {tol:.3e}: {}",
                if ok { "ok" } else { "exceeded" }
            );
            return Ok(ok);
        }
        Command::Sweep {
            config,
            corruption,
            opts,
        } => {
            let config = opts.load(config.as_ref())?;
            for point in sweep(&config, &corruption)? {
                println!("rate {} (budget {})", point.rate, point.budget);
                for p in &point.summary.policies {
                    println!(
                        "  {:<14} mean {:>12.2} median {:>12.2}",
                        p.policy, p.mean, p.median
                    );
                }
            }
            println!("wrote {}", config.out.join("sweep.csv").display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
