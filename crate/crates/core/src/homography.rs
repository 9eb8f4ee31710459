//! 8-DoF planar homography with the (3,3) entry fixed to 1.
//!
//! Parameters are stored in the order
//! `[h11, h12, h13, h21, h22, h23, h31, h32]` of the matrix
//!
//! ```text
//! | h11 h12 h13 |
//! | h21 h22 h23 |
//! | h31 h32  1  |
//! ```
//!
//! `h11, h12, h21, h22` form the linear (rotation/scale) block, `h13, h23`
//! the translation and `h31, h32` the perspective skew. A point `(x, y)`
//! maps to `(x'/w', y'/w')` with `x' = h11 x + h12 y + h13`,
//! `y' = h21 x + h22 y + h23` and `w' = h31 x + h32 y + 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest `|w'|` and `|det|` treated as non-degenerate.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Number of free parameters.
pub const DOF: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("point ({x}, {y}) projects to the line at infinity (w' = {w})")]
    DegenerateProjection { x: f64, y: f64, w: f64 },
    #[error("homography matrix is singular (det = {0})")]
    SingularMatrix(f64),
    #[error("expected {expected} parameters, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter {index} is not finite")]
    NonFinite { index: usize },
}

/// A planar point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// L1 (Manhattan) distance.
    pub fn l1(&self, other: &Point2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    dof: [f64; DOF],
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Homography {
    pub const fn identity() -> Self {
        Self {
            dof: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }

    pub const fn translation(tx: f64, ty: f64) -> Self {
        Self {
            dof: [1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0],
        }
    }

    /// Rotation by `angle` radians about `center`, followed by a translation.
    pub fn rotation_about(angle: f64, center: Point2, translation: (f64, f64)) -> Self {
        let (s, c) = angle.sin_cos();
        let tx = center.x - c * center.x + s * center.y + translation.0;
        let ty = center.y - s * center.x - c * center.y + translation.1;
        Self {
            dof: [c, -s, tx, s, c, ty, 0.0, 0.0],
        }
    }

    pub fn from_dof(dof: [f64; DOF]) -> Result<Self, HomographyError> {
        if let Some(index) = dof.iter().position(|v| !v.is_finite()) {
            return Err(HomographyError::NonFinite { index });
        }
        Ok(Self { dof })
    }

    pub fn from_vector(v: &[f64]) -> Result<Self, HomographyError> {
        let dof: [f64; DOF] = v
            .try_into()
            .map_err(|_| HomographyError::DimensionMismatch {
                expected: DOF,
                got: v.len(),
            })?;
        Self::from_dof(dof)
    }

    pub fn to_vector(&self) -> [f64; DOF] {
        self.dof
    }

    pub fn dof(&self) -> &[f64; DOF] {
        &self.dof
    }

    /// Full 3×3 matrix, row-major, with the (3,3) entry set to 1.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let d = &self.dof;
        [[d[0], d[1], d[2]], [d[3], d[4], d[5]], [d[6], d[7], 1.0]]
    }

    /// Row-major flattening of [`Homography::matrix`].
    pub fn to_row_major(&self) -> [f64; 9] {
        let d = &self.dof;
        [d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], 1.0]
    }

    /// Builds a homography from any invertible 3×3 matrix by dividing
    /// through by its (3,3) entry.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Result<Self, HomographyError> {
        let s = m[2][2];
        if !s.is_finite() || s.abs() <= DEGENERACY_EPS {
            return Err(HomographyError::SingularMatrix(s));
        }
        Self::from_dof([
            m[0][0] / s,
            m[0][1] / s,
            m[0][2] / s,
            m[1][0] / s,
            m[1][1] / s,
            m[1][2] / s,
            m[2][0] / s,
            m[2][1] / s,
        ])
    }

    /// Reads a row-major 9-vector. The last entry must be exactly 1.
    pub fn from_row_major(v: &[f64]) -> Result<Self, HomographyError> {
        if v.len() != 9 {
            return Err(HomographyError::DimensionMismatch {
                expected: 9,
                got: v.len(),
            });
        }
        if v[8] != 1.0 {
            return Err(HomographyError::SingularMatrix(v[8]));
        }
        Self::from_vector(&v[..8])
    }

    pub fn determinant(&self) -> f64 {
        let m = self.matrix();
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, HomographyError> {
        let d = &self.dof;
        let w = d[6] * p.x + d[7] * p.y + 1.0;
        if !(w.abs() > DEGENERACY_EPS) {
            return Err(HomographyError::DegenerateProjection { x: p.x, y: p.y, w });
        }
        let x = d[0] * p.x + d[1] * p.y + d[2];
        let y = d[3] * p.x + d[4] * p.y + d[5];
        if d[6] == 0.0 && d[7] == 0.0 {
            // w' is exactly 1, skip the divide so the affine case stays exact.
            return Ok(Point2 { x, y });
        }
        Ok(Point2 { x: x / w, y: y / w })
    }

    pub fn invert(&self) -> Result<Self, HomographyError> {
        let det = self.determinant();
        if !(det.abs() > DEGENERACY_EPS) {
            return Err(HomographyError::SingularMatrix(det));
        }
        let m = self.matrix();
        // Adjugate; the 1/det factor cancels in the (3,3) renormalization.
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Self::from_matrix(&adj)
    }

    /// The homography that applies `self` first and then `next`.
    pub fn then(&self, next: &Homography) -> Result<Self, HomographyError> {
        let a = next.matrix();
        let b = self.matrix();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, out) in row.iter_mut().enumerate() {
                *out = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Self::from_matrix(&m)
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(deserializer)?;
        Homography::from_row_major(&v).map_err(serde::de::Error::custom)
    }
}
