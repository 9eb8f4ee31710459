//! Synthetic keypoint streams with known ground truth.
//!
//! A fixed set of keypoints is observed for `n_frames` frames. At every move
//! frame the camera truth is composed with a small random drift (rotation
//! about the image center, translation, perspective skew). Each frame
//! carries noisy inlier correspondences plus a fixed count of outliers
//! displaced uniformly within a disc.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homography::{Homography, Point2};
use crate::loss::{MatchSet, MatchedPair};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario config: {field}: {reason}")]
pub struct ConfigInvalid {
    pub field: String,
    pub reason: String,
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigInvalid {
    ConfigInvalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Magnitude ranges `[min, max]` of a single camera move. Each component is
/// drawn uniformly from its range and given a random sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftMagnitude {
    pub translation_px: [f64; 2],
    pub rotation_rad: [f64; 2],
    pub skew: [f64; 2],
}

impl Default for DriftMagnitude {
    fn default() -> Self {
        Self {
            translation_px: [4.0, 10.0],
            rotation_rad: [0.001, 0.005],
            skew: [0.0, 2e-6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rng_seed: u64,
    /// Width and height in pixels.
    pub image_size: [f64; 2],
    pub n_keypoints: usize,
    pub n_frames: u64,
    /// Frames at which the camera moves. `None` spreads five moves evenly.
    pub move_frames: Option<Vec<u64>>,
    pub drift_magnitude: DriftMagnitude,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_radius: f64,
    /// Camera truth of frame 0.
    pub initial_truth: Homography,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            rng_seed: 7,
            image_size: [1920.0, 1080.0],
            n_keypoints: 200,
            n_frames: 30,
            move_frames: None,
            drift_magnitude: DriftMagnitude::default(),
            noise_sigma: 0.5,
            outlier_fraction: 0.1,
            outlier_radius: 300.0,
            initial_truth: Homography::identity(),
        }
    }
}

pub const DEFAULT_MOVES: u64 = 5;

impl ScenarioConfig {
    pub fn image_center(&self) -> Point2 {
        Point2::new(self.image_size[0] / 2.0, self.image_size[1] / 2.0)
    }

    pub fn resolved_move_frames(&self) -> Vec<u64> {
        match &self.move_frames {
            Some(m) => m.clone(),
            None => (1..=DEFAULT_MOVES)
                .map(|k| k * self.n_frames / (DEFAULT_MOVES + 1))
                .collect(),
        }
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.n_keypoints as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        if !self.image_size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(invalid("image_size", "width and height must be positive"));
        }
        if self.n_keypoints == 0 {
            return Err(invalid("n_keypoints", "must be positive"));
        }
        if self.n_frames == 0 {
            return Err(invalid("n_frames", "must be positive"));
        }
        let moves = self.resolved_move_frames();
        if moves.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("move_frames", "must be strictly increasing"));
        }
        if let Some(bad) = moves.iter().find(|&&m| m < 1 || m >= self.n_frames) {
            return Err(invalid(
                "move_frames",
                format!("frame {bad} outside [1, {})", self.n_frames),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(invalid("outlier_fraction", "must be in [0, 1)"));
        }
        if !(self.outlier_radius.is_finite() && self.outlier_radius > 0.0) {
            return Err(invalid("outlier_radius", "must be positive"));
        }
        let d = &self.drift_magnitude;
        for (name, [lo, hi]) in [
            ("drift_magnitude.translation_px", d.translation_px),
            ("drift_magnitude.rotation_rad", d.rotation_rad),
            ("drift_magnitude.skew", d.skew),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(invalid(name, "need 0 <= min <= max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_id: u64,
    pub homography: Homography,
    pub inlier_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub frames: Vec<FrameTruth>,
}

impl GroundTruth {
    pub fn at(&self, frame_id: u64) -> Option<&FrameTruth> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    /// Frames whose truth differs from the previous frame.
    pub fn change_frames(&self) -> Vec<u64> {
        self.frames
            .windows(2)
            .filter(|w| w[0].homography != w[1].homography)
            .map(|w| w[1].frame_id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stream: Vec<MatchSet>,
    pub truth: GroundTruth,
}

fn signed_in(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    let mag = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn sample_drift(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> Homography {
    let d = &cfg.drift_magnitude;
    let angle = signed_in(rng, d.rotation_rad);
    let tx = signed_in(rng, d.translation_px);
    let ty = signed_in(rng, d.translation_px);
    let k1 = signed_in(rng, d.skew);
    let k2 = signed_in(rng, d.skew);
    let mut dof = Homography::rotation_about(angle, cfg.image_center(), (tx, ty)).to_vector();
    dof[6] = k1;
    dof[7] = k2;
    Homography::from_dof(dof).expect("finite drift")
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    (r * theta.cos(), r * theta.sin())
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario, ConfigInvalid> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let [w, h] = cfg.image_size;
    let base: Vec<Point2> = (0..cfg.n_keypoints)
        .map(|_| Point2::new(rng.random_range(0.0..w), rng.random_range(0.0..h)))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    let moves = cfg.resolved_move_frames();
    let n_outliers = cfg.outlier_count();

    let mut truth_h = cfg.initial_truth;
    let mut stream = Vec::with_capacity(cfg.n_frames as usize);
    let mut truth = Vec::with_capacity(cfg.n_frames as usize);
    for frame_id in 0..cfg.n_frames {
        if moves.contains(&frame_id) {
            let drift = sample_drift(&mut rng, cfg);
            truth_h = truth_h
                .then(&drift)
                .map_err(|e| invalid("drift_magnitude", e.to_string()))?;
        }
        let mut inlier_flags = vec![true; cfg.n_keypoints];
        for k in index::sample(&mut rng, cfg.n_keypoints, n_outliers) {
            inlier_flags[k] = false;
        }
        let mut pairs = Vec::with_capacity(cfg.n_keypoints);
        for (p, &inlier) in base.iter().zip(&inlier_flags) {
            let mapped = truth_h
                .apply(*p)
                .map_err(|e| invalid("drift_magnitude", e.to_string()))?;
            let (dx, dy) = if !inlier {
                uniform_in_disc(&mut rng, cfg.outlier_radius)
            } else if cfg.noise_sigma > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            pairs.push(MatchedPair::new(
                *p,
                Point2::new(mapped.x + dx, mapped.y + dy),
            ));
        }
        stream.push(MatchSet { frame_id, pairs });
        truth.push(FrameTruth {
            frame_id,
            homography: truth_h,
            inlier_flags,
        });
    }
    Ok(Scenario {
        stream,
        truth: GroundTruth { frames: truth },
    })
}

/// Cell-centered `n × n` grid over an image.
pub fn grid_points(image_size: [f64; 2], n: usize) -> Vec<Point2> {
    let [w, h] = image_size;
    (0..n)
        .flat_map(|j| {
            (0..n).map(move |i| {
                Point2::new(
                    (i as f64 + 0.5) / n as f64 * w,
                    (j as f64 + 0.5) / n as f64 * h,
                )
            })
        })
        .collect()
}

/// Mean L1 distance between `h` and `truth` images of `sample`. A point that
/// either transform sends to infinity makes the result infinite.
pub fn reprojection_error_vs_truth(h: &Homography, truth: &Homography, sample: &[Point2]) -> f64 {
    let total: f64 = sample
        .iter()
        .map(|p| match (h.apply(*p), truth.apply(*p)) {
            (Ok(a), Ok(b)) => a.l1(&b),
            _ => f64::INFINITY,
        })
        .sum();
    total / sample.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> ScenarioConfig {
        ScenarioConfig {
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            move_frames: Some(vec![]),
            n_frames: 3,
            n_keypoints: 50,
            ..Default::default()
        }
    }

    #[test]
    fn static_noiseless_scene_is_exact() {
        let s = generate(&quiet()).unwrap();
        for m in &s.stream {
            assert!(m.pairs.iter().all(|p| p.source == p.target));
        }
        assert!(s.truth.frames.iter().all(|f| f.homography == Homography::identity()));
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = ScenarioConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = ScenarioConfig {
            rng_seed: 8,
            ..cfg.clone()
        };
        assert_ne!(generate(&cfg).unwrap().stream, generate(&other).unwrap().stream);
    }

    #[test]
    fn default_moves_change_truth_five_times() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.resolved_move_frames(), vec![5, 10, 15, 20, 25]);
        let s = generate(&cfg).unwrap();
        assert_eq!(s.truth.change_frames(), vec![5, 10, 15, 20, 25]);
        assert_eq!(s.truth.frames[0].homography, Homography::identity());
    }

    #[test]
    fn outlier_count_per_frame() {
        let cfg = ScenarioConfig {
            outlier_fraction: 0.15,
            n_keypoints: 33,
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        for f in &s.truth.frames {
            assert_eq!(f.inlier_flags.iter().filter(|v| !**v).count(), 5);
        }
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = ScenarioConfig {
            move_frames: Some(vec![3, 40]),
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap_err().field, "move_frames");
        let cfg = ScenarioConfig {
            move_frames: Some(vec![4, 4]),
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().field, "move_frames");
        let cfg = ScenarioConfig {
            outlier_fraction: 1.0,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().field, "outlier_fraction");
    }

    #[test]
    fn reprojection_error_examples() {
        let grid = grid_points([1920.0, 1080.0], 10);
        assert_eq!(grid.len(), 100);
        let truth = Homography::rotation_about(0.02, Point2::new(960.0, 540.0), (12.0, -7.0));
        assert_eq!(reprojection_error_vs_truth(&truth, &truth, &grid), 0.0);
        let shifted = truth.then(&Homography::translation(1.0, 0.0)).unwrap();
        let e = reprojection_error_vs_truth(&shifted, &truth, &grid);
        assert!((e - 1.0).abs() < 1e-9, "{e}");
    }

    #[test]
    fn reprojection_error_matches_hand_computation() {
        let grid = grid_points([640.0, 480.0], 10);
        let a = Homography::from_dof([1.01, 0.02, 3.0, -0.015, 0.99, -2.0, 1e-5, -2e-5]).unwrap();
        let b = Homography::from_dof([0.98, -0.01, -1.0, 0.02, 1.02, 4.0, -1e-5, 1e-5]).unwrap();
        let project = |d: &[f64; 8], p: &Point2| {
            let w = d[6] * p.x + d[7] * p.y + 1.0;
            (
                (d[0] * p.x + d[1] * p.y + d[2]) / w,
                (d[3] * p.x + d[4] * p.y + d[5]) / w,
            )
        };
        let mut sum = 0.0;
        for p in &grid {
            let (ax, ay) = project(a.dof(), p);
            let (bx, by) = project(b.dof(), p);
            sum += (ax - bx).abs() + (ay - by).abs();
        }
        let expected = sum / grid.len() as f64;
        let got = reprojection_error_vs_truth(&a, &b, &grid);
        assert!((got - expected).abs() < 1e-9);
    }
}
