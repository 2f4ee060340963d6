//! Per-item mean estimators over binary click logs.
//!
//! The robust estimator splits an item's log into odd-sized blocks under a
//! random partition, takes each block's majority bit, averages those bits and
//! maps the average back through the inverse of the majority map
//! `q_b(p) = P(Bin(b, p) >= (b + 1) / 2)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::partition_rng;

/// Append-only log of observed click bits for one item.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleLog {
    bits: Vec<bool>,
    ones: usize,
}

impl SampleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
        self.ones += bit as usize;
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl FromIterator<bool> for SampleLog {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut log = SampleLog::new();
        for b in iter {
            log.push(b);
        }
        log
    }
}

/// A point estimate; `low_confidence` marks the empty-log case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub low_confidence: bool,
}

impl Estimate {
    fn confident(value: f64) -> Self {
        Self {
            value,
            low_confidence: false,
        }
    }

    fn unknown() -> Self {
        Self {
            value: 0.0,
            low_confidence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    /// Block-size constant; blocks hold about `alpha * ln s` samples.
    pub alpha: f64,
    /// Bisection stops once `|q_b(m) - y| <= eta`.
    pub eta: f64,
    pub max_iters: u32,
    pub partition_seed: u64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            alpha: 16.0,
            eta: 1e-6,
            max_iters: 60,
            partition_seed: 0,
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 15.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must exceed 15, got {}",
                self.alpha
            )));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in (0, 0.5), got {}",
                self.eta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_partition_seed(mut self, seed: u64) -> Self {
        self.partition_seed = seed;
        self
    }
}

fn check_odd(b: usize) -> Result<()> {
    if b.is_multiple_of(2) {
        Err(Error::InvalidArgument(format!(
            "block size must be odd, got {b}"
        )))
    } else {
        Ok(())
    }
}

/// Majority map: probability that `b` Bernoulli(`p`) draws hold a majority of ones.
pub fn q_b(b: usize, p: f64) -> Result<f64> {
    check_odd(b)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(majority_prob(b, p))
}

/// `q_b` without argument checks. Terms are summed in log space so that
/// large blocks neither overflow the binomial coefficients nor underflow
/// early. Above 1/2 the value is taken as `1 - q_b(1 - p)`, which keeps the
/// small tail accurate and the map monotone in floating point.
pub(crate) fn majority_prob(b: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if p > 0.5 {
        return 1.0 - lower_majority_prob(b, 1.0 - p);
    }
    lower_majority_prob(b, p)
}

fn lower_majority_prob(b: usize, p: f64) -> f64 {
    let half = b.div_ceil(2);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    // ln C(b, half)
    let mut ln_coef: f64 = (0..half)
        .map(|i| ((b - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum();
    let mut total = 0.0;
    for r in half..=b {
        total += (ln_coef + r as f64 * lp + (b - r) as f64 * lq).exp();
        ln_coef += ((b - r) as f64).ln() - ((r + 1) as f64).ln();
    }
    total.min(1.0)
}

/// Inverts `q_b` by bisection on `[0, 1]`.
///
/// Returns the first midpoint whose image lies within `eta` of `y`, or the
/// final bracket midpoint after `max_iters` steps.
pub fn calibrate(b: usize, y: f64, params: &CalibrationParams) -> Result<f64> {
    check_odd(b)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidArgument(format!(
            "target must lie in [0, 1], got {y}"
        )));
    }
    Ok(bisect_majority(b, y, params.eta, params.max_iters))
}

fn bisect_majority(b: usize, y: f64, eta: f64, max_iters: u32) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..max_iters {
        let mid = 0.5 * (lo + hi);
        let v = majority_prob(b, mid);
        if (v - y).abs() <= eta {
            return mid;
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Odd block size for a log of `s` samples: `ceil(alpha * ln s)` rounded up
/// to the next odd integer, at least 1.
pub fn block_size(s: usize, alpha: f64) -> usize {
    let raw = if s <= 1 {
        0
    } else {
        (alpha * (s as f64).ln()).ceil() as usize
    };
    let b = raw.max(1);
    if b % 2 == 0 {
        b + 1
    } else {
        b
    }
}

/// Minimum log length before the block estimator replaces the plain mean.
pub fn fallback_threshold(s: usize, alpha: f64) -> usize {
    (alpha * (s.max(2) as f64).ln()).ceil() as usize
}

/// How samples are assigned to blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    /// Consecutive blocks in log order.
    Identity,
    /// Uniformly random assignment, reproducible from `(seed, key)`.
    Shuffled { seed: u64, key: u64 },
}

/// Counts of marked elements in each of `blocks` blocks of `block` elements,
/// when the blocks are filled from a uniformly random permutation of `total`
/// elements of which `marked` are marked. Leftover elements are dropped.
///
/// Draws the permutation's marked/unmarked pattern position by position,
/// which has the same law as shuffling and then reading the prefix.
pub fn random_block_counts<R: Rng + ?Sized>(
    total: usize,
    marked: usize,
    block: usize,
    blocks: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(marked <= total && block * blocks <= total);
    let mut remaining = total;
    let mut marked_left = marked;
    let mut counts = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut c = 0;
        for _ in 0..block {
            if marked_left == 0 {
                break;
            }
            if marked_left == remaining {
                c += 1;
                marked_left -= 1;
                remaining -= 1;
                continue;
            }
            if rng.gen_range(0..remaining) < marked_left {
                c += 1;
                marked_left -= 1;
            }
            remaining -= 1;
        }
        // positions skipped after exhausting marks still consume the pool
        remaining = total - (counts.len() + 1) * block;
        counts.push(c);
    }
    counts
}

/// Mean of per-block majority bits for a fixed odd block size.
///
/// Returns `None` when the log is shorter than one block.
pub fn mean_of_medians(bits: &[bool], block: usize, partition: Partition) -> Result<Option<f64>> {
    check_odd(block)?;
    let blocks = bits.len() / block;
    if blocks == 0 {
        return Ok(None);
    }
    let majority = block.div_ceil(2);
    let counts: Vec<usize> = match partition {
        Partition::Identity => bits
            .chunks_exact(block)
            .map(|c| c.iter().filter(|&&b| b).count())
            .collect(),
        Partition::Shuffled { seed, key } => {
            let ones = bits.iter().filter(|&&b| b).count();
            let mut rng = partition_rng(seed, key);
            random_block_counts(bits.len(), ones, block, blocks, &mut rng)
        }
    };
    let medians = counts.iter().filter(|&&c| c >= majority).count();
    Ok(Some(medians as f64 / blocks as f64))
}

/// Mean of medians with an explicit block size, calibrated through `q_block`.
pub fn calibrated_with_block(
    bits: &[bool],
    block: usize,
    partition: Partition,
    params: &CalibrationParams,
) -> Result<Estimate> {
    match mean_of_medians(bits, block, partition)? {
        Some(m) => Ok(Estimate::confident(calibrate(block, m, params)?)),
        None => Ok(plain_mean(bits)),
    }
}

/// Calibrated mean-of-medians estimate of a log.
///
/// Logs shorter than `ceil(alpha * ln max(s, 2))` fall back to the plain
/// mean. `call_key` together with `params.partition_seed` fixes the random
/// partition, so equal inputs give equal outputs.
pub fn calibrated_mean_of_medians(
    log: &SampleLog,
    params: &CalibrationParams,
    call_key: u64,
) -> Estimate {
    let s = log.len();
    if s == 0 {
        return Estimate::unknown();
    }
    if s < fallback_threshold(s, params.alpha) {
        return empirical_mean(log);
    }
    let block = block_size(s, params.alpha);
    let blocks = s / block;
    if blocks == 0 {
        return empirical_mean(log);
    }
    let mut rng = partition_rng(params.partition_seed, call_key);
    let counts = random_block_counts(s, log.ones(), block, blocks, &mut rng);
    let majority = block.div_ceil(2);
    let medians = counts.iter().filter(|&&c| c >= majority).count();
    let m = medians as f64 / blocks as f64;
    Estimate::confident(bisect_majority(block, m, params.eta, params.max_iters))
}

pub fn empirical_mean(log: &SampleLog) -> Estimate {
    if log.is_empty() {
        Estimate::unknown()
    } else {
        Estimate::confident(log.ones() as f64 / log.len() as f64)
    }
}

fn plain_mean(bits: &[bool]) -> Estimate {
    if bits.is_empty() {
        Estimate::unknown()
    } else {
        Estimate::confident(bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64)
    }
}

/// Bernoulli variance proxy `mu (1 - mu)`.
pub fn variance_proxy(mu_hat: f64) -> f64 {
    let m = mu_hat.clamp(0.0, 1.0);
    m * (1.0 - m)
}
