use serde::{Deserialize, Serialize};

use super::FdaError;

/// Box-constrained search domain mapped affinely onto `[-1, 1]^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = FdaError;

    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        SearchSpace::new(raw.lower, raw.upper)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(s: SearchSpace) -> Self {
        RawSpace {
            lower: s.lower,
            upper: s.upper,
        }
    }
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, FdaError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(FdaError::InvalidSpace(format!(
                "bounds must be non-empty and of equal length (lower {}, upper {})",
                lower.len(),
                upper.len()
            )));
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(FdaError::InvalidSpace(format!(
                    "dimension {d}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same bounds `[lower, upper]` in every one of `dim` coordinates.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self, FdaError> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    fn center_half(&self, d: usize) -> (f64, f64) {
        let (l, u) = (self.lower[d], self.upper[d]);
        (0.5 * (l + u), 0.5 * (u - l))
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>, FdaError> {
        if x.len() != self.dim() {
            return Err(FdaError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(FdaError::OutOfBounds(x.to_vec()));
        }
        Ok(x
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let (c, h) = self.center_half(d);
                ((v - c) / h).clamp(-1.0, 1.0)
            })
            .collect())
    }

    /// Maps a normalized point back to the box, clamping to `[-1, 1]` first.
    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(d, t)| {
                let (c, h) = self.center_half(d);
                (c + t.clamp(-1.0, 1.0) * h).clamp(self.lower[d], self.upper[d])
            })
            .collect()
    }
}
