//! Click probabilities from per-item rating summaries.
//!
//! Ratings are shrunk toward a prior with a Bayesian average, then squashed
//! through a logistic curve. Input is a CSV with header
//! `item_id,avg_rating,num_ratings`.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRatingSummary {
    pub item_id: String,
    pub avg_rating: f64,
    pub num_ratings: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 1.0, max: 5.0 }
    }
}

/// Pipeline constants. Unset fields take dataset-derived defaults: the prior
/// mean is the rating-count-weighted mean rating, the prior weight is the mean
/// rating count, and the sigmoid is centred on the prior mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestConfig {
    pub prior_mean: Option<f64>,
    pub prior_weight: Option<f64>,
    pub sigmoid_slope: f64,
    pub sigmoid_center: Option<f64>,
    pub scale: RatingScale,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            prior_mean: None,
            prior_weight: None,
            sigmoid_slope: 1.5,
            sigmoid_center: None,
            scale: RatingScale::default(),
        }
    }
}

/// `(w m0 + n r) / (w + n)`.
pub fn bayesian_average(summary: &ItemRatingSummary, prior_mean: f64, prior_weight: f64) -> f64 {
    let n = summary.num_ratings as f64;
    (prior_weight * prior_mean + n * summary.avg_rating) / (prior_weight + n)
}

/// Logistic map `1 / (1 + exp(-slope (rating - center)))`.
pub fn rating_to_click_prob(rating: f64, slope: f64, center: f64) -> f64 {
    1.0 / (1.0 + (-slope * (rating - center)).exp())
}

pub fn load_summaries(path: &Path, scale: RatingScale) -> Result<Vec<ItemRatingSummary>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_summaries(&text, path, scale)
}

/// Parses summary CSV text; `origin` only labels errors.
pub fn parse_summaries(
    text: &str,
    origin: &Path,
    scale: RatingScale,
) -> Result<Vec<ItemRatingSummary>> {
    let err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let expected = ["item_id", "avg_rating", "num_ratings"];
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(err(1, format!("expected header `{}`", expected.join(","))));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(err(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let item_id = record[0].trim().to_string();
        if item_id.is_empty() {
            return Err(err(line, "empty item_id".into()));
        }
        let avg_rating: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("avg_rating `{}` is not a number", &record[1])))?;
        let num_ratings: u64 = record[2].trim().parse().map_err(|_| {
            err(
                line,
                format!("num_ratings `{}` is not a non-negative integer", &record[2]),
            )
        })?;
        if num_ratings == 0 {
            return Err(err(line, "num_ratings must be at least 1".into()));
        }
        if !(scale.min..=scale.max).contains(&avg_rating) {
            return Err(err(
                line,
                format!(
                    "avg_rating {avg_rating} outside [{}, {}]",
                    scale.min, scale.max
                ),
            ));
        }
        out.push(ItemRatingSummary {
            item_id,
            avg_rating,
            num_ratings,
        });
    }
    Ok(out)
}

/// Per-item pipeline output.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmParameters {
    pub item_id: String,
    pub bayes_rating: f64,
    pub click_prob: f64,
}

/// Resolved `(prior_mean, prior_weight, center)` for a dataset.
pub fn resolve_constants(
    summaries: &[ItemRatingSummary],
    config: &IngestConfig,
) -> (f64, f64, f64) {
    let total: f64 = summaries.iter().map(|s| s.num_ratings as f64).sum();
    let weighted: f64 = summaries
        .iter()
        .map(|s| s.avg_rating * s.num_ratings as f64)
        .sum();
    let m0 = config.prior_mean.unwrap_or(if total > 0.0 {
        weighted / total
    } else {
        0.5 * (config.scale.min + config.scale.max)
    });
    let w = config.prior_weight.unwrap_or(if summaries.is_empty() {
        0.0
    } else {
        total / summaries.len() as f64
    });
    let c = config.sigmoid_center.unwrap_or(m0);
    (m0, w, c)
}

pub fn click_probabilities(
    summaries: &[ItemRatingSummary],
    config: &IngestConfig,
) -> Result<Vec<ArmParameters>> {
    if !(config.sigmoid_slope > 0.0) {
        return Err(Error::Config(format!(
            "sigmoid slope must be positive, got {}",
            config.sigmoid_slope
        )));
    }
    let (m0, w, c) = resolve_constants(summaries, config);
    if w < 0.0 {
        return Err(Error::Config(format!("prior weight must be >= 0, got {w}")));
    }
    Ok(summaries
        .iter()
        .map(|s| {
            let bayes_rating = bayesian_average(s, m0, w);
            ArmParameters {
                item_id: s.item_id.clone(),
                bayes_rating,
                click_prob: rating_to_click_prob(bayes_rating, config.sigmoid_slope, c),
            }
        })
        .collect())
}
