//! Percentile-trimmed L1 alignment loss over matched keypoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homography::{Homography, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("error list is empty")]
    EmptyErrorList,
    #[error("match set for frame {0} has no pairs")]
    EmptyMatchSet(u64),
    #[error("percentile must be in [1, 100], got {0}")]
    InvalidPercentile(u32),
    #[error("degenerate penalty must be positive and finite, got {0}")]
    InvalidPenalty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub source: Point2,
    pub target: Point2,
}

impl MatchedPair {
    pub fn new(source: impl Into<Point2>, target: impl Into<Point2>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Matched keypoints of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub frame_id: u64,
    pub pairs: Vec<MatchedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimmedLossConfig {
    /// Pairs with error at or below this percentile of all errors are summed.
    pub percentile_i: u32,
    /// Error assigned to a pair whose source projects to infinity.
    pub degenerate_penalty: f64,
}

impl Default for TrimmedLossConfig {
    fn default() -> Self {
        Self {
            percentile_i: 80,
            degenerate_penalty: 1e6,
        }
    }
}

impl TrimmedLossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(1..=100).contains(&self.percentile_i) {
            return Err(LossError::InvalidPercentile(self.percentile_i));
        }
        if !(self.degenerate_penalty.is_finite() && self.degenerate_penalty > 0.0) {
            return Err(LossError::InvalidPenalty(self.degenerate_penalty));
        }
        Ok(())
    }
}

pub fn pair_error(h: &Homography, pair: &MatchedPair, cfg: &TrimmedLossConfig) -> f64 {
    match h.apply(pair.source) {
        Ok(p) => pair.target.l1(&p),
        Err(_) => cfg.degenerate_penalty,
    }
}

/// 1-based nearest rank `ceil(i/100 * n)`, clamped to `[1, n]`.
fn nearest_rank(n: usize, i: u32) -> usize {
    (((i as usize) * n).div_ceil(100)).clamp(1, n)
}

/// Nearest-rank percentile of `errors`.
pub fn percentile_threshold(errors: &[f64], i: u32) -> Result<f64, LossError> {
    if errors.is_empty() {
        return Err(LossError::EmptyErrorList);
    }
    if !(1..=100).contains(&i) {
        return Err(LossError::InvalidPercentile(i));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(sorted.len(), i) - 1])
}

/// Sum of the errors at or below the `i`-th percentile threshold.
///
/// The summation runs over the ascending sorted list so the result does not
/// depend on the input order.
pub fn trimmed_sum(errors: &[f64], i: u32) -> Result<f64, LossError> {
    if errors.is_empty() {
        return Err(LossError::EmptyErrorList);
    }
    if !(1..=100).contains(&i) {
        return Err(LossError::InvalidPercentile(i));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[nearest_rank(sorted.len(), i) - 1];
    Ok(sorted.iter().take_while(|&&e| e <= threshold).sum())
}

pub fn pair_errors(h: &Homography, matches: &MatchSet, cfg: &TrimmedLossConfig) -> Vec<f64> {
    matches
        .pairs
        .iter()
        .map(|pair| pair_error(h, pair, cfg))
        .collect()
}

pub fn trimmed_loss(
    h: &Homography,
    matches: &MatchSet,
    cfg: &TrimmedLossConfig,
) -> Result<f64, LossError> {
    if matches.pairs.is_empty() {
        return Err(LossError::EmptyMatchSet(matches.frame_id));
    }
    trimmed_sum(&pair_errors(h, matches, cfg), cfg.percentile_i)
}
