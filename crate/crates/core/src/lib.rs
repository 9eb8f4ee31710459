//! Derivative-free dynamic optimization of planar homographies.
//!
//! * [`homography`]: 8-DoF projective transform and its inverse.
//! * [`loss`]: percentile-trimmed L1 alignment loss over matched keypoints.
//! * [`fda`]: the fractal decomposition optimizer.
//! * [`dynamic`]: period tracking, change detection and the evaluation trace.
//! * [`synth`]: ground-truth scenes with camera drift, noise and outliers.
//! * [`io`] and [`cli`]: file formats and the command-line front end.

pub mod cli;
pub mod config;
pub mod dynamic;
pub mod fda;
pub mod homography;
pub mod io;
pub mod loss;
pub mod synth;

pub use fda::{explore, FdaConfig, OptimizationResult, SearchSpace};
pub use homography::{Homography, HomographyError, Point2};
pub use loss::{trimmed_loss, MatchSet, MatchedPair, TrimmedLossConfig};
