//! Dynamic alignment over a stream of frames.
//!
//! The incumbent homography is scored on every incoming frame. A jump of
//! that score against the running best of the current period is treated as
//! a camera move: a new period opens and the optimizer is run on the new
//! frame. Every objective evaluation lands in a [`DynamicTrace`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fda::{self, FdaConfig, FdaError, SearchSpace};
use crate::homography::{Homography, DOF};
use crate::loss::{trimmed_loss, LossError, MatchSet, TrimmedLossConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    #[error("match stream is empty")]
    EmptyStream,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optimizer(#[from] FdaError),
    #[error("invalid runner config: {0}")]
    ConfigInvalid(String),
    #[error("frame ids must strictly increase ({prev} followed by {next})")]
    FrameOrder { prev: u64, next: u64 },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("trace is empty")]
pub struct EmptyTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangeDetectorConfig {
    pub relative_jump: f64,
    pub absolute_floor: f64,
}

impl Default for ChangeDetectorConfig {
    fn default() -> Self {
        Self {
            relative_jump: 3.0,
            absolute_floor: 1.0,
        }
    }
}

/// True when `new_loss` exceeds both the absolute floor and
/// `relative_jump` times the previous best.
pub fn detect_change(prev_best_loss: f64, new_loss: f64, det: &ChangeDetectorConfig) -> bool {
    new_loss > det.absolute_floor.max(det.relative_jump * prev_best_loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStartPolicy {
    Fresh,
    #[default]
    Warm,
}

/// Default 8-DoF box: diagonal in `[0.5, 1.5]`, off-diagonal in
/// `[-0.5, 0.5]`, translation in `[-100, 100]` px, skew in `[-0.005, 0.005]`.
pub fn default_dof_bounds() -> SearchSpace {
    SearchSpace::new(
        vec![0.5, -0.5, -100.0, -0.5, 0.5, -100.0, -0.005, -0.005],
        vec![1.5, 0.5, 100.0, 0.5, 1.5, 100.0, 0.005, 0.005],
    )
    .expect("static bounds are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerConfig {
    pub dof_bounds: SearchSpace,
    pub loss: TrimmedLossConfig,
    pub fda: FdaConfig,
    pub detector: ChangeDetectorConfig,
    pub warm_start_policy: WarmStartPolicy,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            dof_bounds: default_dof_bounds(),
            loss: TrimmedLossConfig::default(),
            fda: FdaConfig::default(),
            detector: ChangeDetectorConfig::default(),
            warm_start_policy: WarmStartPolicy::default(),
        }
    }
}

impl RunnerConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.dof_bounds.dim() != DOF {
            return Err(RunnerError::ConfigInvalid(format!(
                "dof_bounds must have {DOF} dimensions, got {}",
                self.dof_bounds.dim()
            )));
        }
        if !self
            .dof_bounds
            .contains(&Homography::identity().to_vector())
        {
            return Err(RunnerError::ConfigInvalid(
                "dof_bounds must contain the identity homography".into(),
            ));
        }
        self.loss.validate()?;
        self.fda.validate()?;
        let det = &self.detector;
        if !(det.relative_jump.is_finite() && det.relative_jump > 1.0) {
            return Err(RunnerError::ConfigInvalid(
                "detector.relative_jump must be > 1".into(),
            ));
        }
        if !(det.absolute_floor.is_finite() && det.absolute_floor >= 0.0) {
            return Err(RunnerError::ConfigInvalid(
                "detector.absolute_floor must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicTraceEntry {
    pub eval_index: usize,
    pub frame_id: u64,
    pub period_index: usize,
    pub current_loss: f64,
    pub best_loss_period: f64,
    pub is_change_event: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DynamicTrace {
    pub entries: Vec<DynamicTraceEntry>,
}

impl DynamicTrace {
    fn push(&mut self, frame_id: u64, period_index: usize, current: f64, best: f64, change: bool) {
        self.entries.push(DynamicTraceEntry {
            eval_index: self.entries.len(),
            frame_id,
            period_index,
            current_loss: current,
            best_loss_period: best,
            is_change_event: change,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn period(&self, index: usize) -> impl Iterator<Item = &DynamicTraceEntry> {
        self.entries.iter().filter(move |e| e.period_index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period_index: usize,
    pub start_frame: u64,
    #[serde(rename = "homography")]
    pub best_h: Homography,
    /// Loss of `best_h` on the last frame of the period.
    pub best_loss: f64,
    pub evaluations: usize,
}

struct OpenPeriod {
    index: usize,
    start_frame: u64,
    last: usize,
    best_h: Homography,
    best_loss: f64,
    evaluations: usize,
}

impl OpenPeriod {
    fn close(self, stream: &[MatchSet], cfg: &RunnerConfig) -> Result<PeriodRecord, RunnerError> {
        Ok(PeriodRecord {
            period_index: self.index,
            start_frame: self.start_frame,
            best_h: self.best_h,
            best_loss: trimmed_loss(&self.best_h, &stream[self.last], &cfg.loss)?,
            evaluations: self.evaluations,
        })
    }
}

fn optimize_frame(
    frame: &MatchSet,
    cfg: &RunnerConfig,
    warm_start: Option<&[f64]>,
) -> Result<fda::OptimizationResult, RunnerError> {
    let loss_cfg = cfg.loss;
    let objective = |v: &[f64]| {
        let h = Homography::from_vector(v).expect("denormalized point is finite");
        trimmed_loss(&h, frame, &loss_cfg).expect("frame checked non-empty")
    };
    Ok(fda::explore(objective, &cfg.dof_bounds, &cfg.fda, warm_start)?)
}

/// Runs the tracking loop over `stream`.
pub fn run_dynamic(
    stream: &[MatchSet],
    cfg: &RunnerConfig,
) -> Result<(DynamicTrace, Vec<PeriodRecord>), RunnerError> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(RunnerError::EmptyStream);
    }
    if let Some(empty) = stream.iter().find(|m| m.pairs.is_empty()) {
        return Err(LossError::EmptyMatchSet(empty.frame_id).into());
    }
    if let Some(w) = stream.windows(2).find(|w| w[0].frame_id >= w[1].frame_id) {
        return Err(RunnerError::FrameOrder {
            prev: w[0].frame_id,
            next: w[1].frame_id,
        });
    }

    let mut trace = DynamicTrace::default();
    let mut periods = Vec::new();
    let mut open: Option<OpenPeriod> = None;

    for (k, frame) in stream.iter().enumerate() {
        // Score of the incumbent on the new frame, and whether it opens a period.
        let probe = match &open {
            None => None,
            Some(p) => {
                let loss = trimmed_loss(&p.best_h, frame, &cfg.loss)?;
                Some((loss, detect_change(p.best_loss, loss, &cfg.detector)))
            }
        };

        match (probe, open.as_mut()) {
            (Some((loss, false)), Some(p)) => {
                p.best_loss = p.best_loss.min(loss);
                p.last = k;
                p.evaluations += 1;
                trace.push(frame.frame_id, p.index, loss, p.best_loss, false);
            }
            _ => {
                let index = periods.len() + usize::from(open.is_some());
                let previous = open.take();
                let warm = match (&previous, cfg.warm_start_policy) {
                    (Some(p), WarmStartPolicy::Warm) => Some(p.best_h.to_vector()),
                    _ => None,
                };
                let mut period = OpenPeriod {
                    index,
                    start_frame: frame.frame_id,
                    last: k,
                    best_h: Homography::identity(),
                    best_loss: f64::INFINITY,
                    evaluations: 0,
                };
                let mut flag = true;
                if let (Some(prev), Some((loss, _))) = (&previous, probe) {
                    period.best_h = prev.best_h;
                    period.best_loss = loss;
                    period.evaluations = 1;
                    trace.push(frame.frame_id, index, loss, loss, true);
                    flag = false;
                }
                if let Some(prev) = previous {
                    periods.push(prev.close(stream, cfg)?);
                }

                let result = optimize_frame(frame, cfg, warm.as_ref().map(|w| &w[..]))?;
                for entry in &result.trace {
                    let best = period.best_loss.min(entry.best_so_far);
                    trace.push(frame.frame_id, index, entry.value, best, flag);
                    flag = false;
                }
                period.evaluations += result.evaluations_used;
                if result.best_value < period.best_loss {
                    period.best_h = Homography::from_vector(&result.best_point)
                        .expect("optimizer returns finite points");
                    period.best_loss = result.best_value;
                }
                open = Some(period);
            }
        }
    }

    if let Some(p) = open {
        periods.push(p.close(stream, cfg)?);
    }
    Ok((trace, periods))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period_index: usize,
    pub start_frame: u64,
    pub final_best_loss: f64,
    /// Entries of the period up to and including the first whose best is
    /// within 5% of the final best.
    pub evaluations_to_within_5pct: usize,
    pub peak_loss: f64,
}

pub fn trace_summary(trace: &DynamicTrace) -> Result<Vec<PeriodSummary>, EmptyTrace> {
    if trace.is_empty() {
        return Err(EmptyTrace);
    }
    let mut out: Vec<PeriodSummary> = Vec::new();
    let mut start = 0;
    let entries = &trace.entries;
    while start < entries.len() {
        let index = entries[start].period_index;
        let end = entries[start..]
            .iter()
            .position(|e| e.period_index != index)
            .map_or(entries.len(), |n| start + n);
        let slice = &entries[start..end];
        let final_best = slice.last().expect("non-empty slice").best_loss_period;
        let target = final_best * 1.05;
        let reach = slice
            .iter()
            .position(|e| e.best_loss_period <= target)
            .map_or(slice.len(), |n| n + 1);
        out.push(PeriodSummary {
            period_index: index,
            start_frame: slice[0].frame_id,
            final_best_loss: final_best,
            evaluations_to_within_5pct: reach,
            peak_loss: slice[0].current_loss,
        });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homography::Point2;
    use crate::loss::MatchedPair;

    fn frame(frame_id: u64, h: &Homography) -> MatchSet {
        let pairs = (0..60)
            .map(|k| {
                let s = Point2::new(
                    (k * 137 % 1920) as f64 + 0.25,
                    (k * 71 % 1080) as f64 + 0.5,
                );
                MatchedPair::new(s, h.apply(s).unwrap())
            })
            .collect();
        MatchSet { frame_id, pairs }
    }

    #[test]
    fn detector_examples() {
        let det = ChangeDetectorConfig::default();
        assert!(detect_change(2.0, 50.0, &det));
        assert!(!detect_change(2.0, 2.1, &det));
        assert!(!detect_change(0.0, 0.5, &det));
        assert!(!detect_change(2.0, 6.0, &det));
    }

    #[test]
    fn static_translation_is_recovered() {
        let gt = Homography::translation(12.0, -7.0);
        let (trace, periods) = run_dynamic(&[frame(0, &gt)], &RunnerConfig::default()).unwrap();
        assert_eq!(periods.len(), 1);
        let best = periods[0].best_h.to_vector();
        for (a, b) in best.iter().zip(gt.to_vector()) {
            assert!((a - b).abs() < 0.05, "{best:?}");
        }
        assert!(periods[0].best_loss <= 1e-3, "{}", periods[0].best_loss);
        assert_eq!(trace.entries.iter().filter(|e| e.is_change_event).count(), 1);
        assert!(trace.entries[0].is_change_event);
    }

    #[test]
    fn repeated_frames_stay_in_one_period() {
        let gt = Homography::translation(3.0, 2.0);
        let stream: Vec<_> = (0..4).map(|f| frame(f, &gt)).collect();
        let cfg = RunnerConfig {
            fda: FdaConfig {
                eval_budget: 3000,
                ..Default::default()
            },
            ..Default::default()
        };
        let (trace, periods) = run_dynamic(&stream, &cfg).unwrap();
        assert_eq!(periods.len(), 1);
        assert_eq!(periods[0].evaluations, trace.len());
        assert!(trace.entries.iter().all(|e| e.period_index == 0));
    }

    #[test]
    fn invalid_inputs() {
        let cfg = RunnerConfig::default();
        assert_eq!(run_dynamic(&[], &cfg), Err(RunnerError::EmptyStream));
        let empty = MatchSet {
            frame_id: 3,
            pairs: vec![],
        };
        assert_eq!(
            run_dynamic(&[empty], &cfg),
            Err(RunnerError::Loss(LossError::EmptyMatchSet(3)))
        );
        let mut lower = default_dof_bounds().lower().to_vec();
        lower[0] = 1.1;
        let bad = RunnerConfig {
            dof_bounds: SearchSpace::new(lower, default_dof_bounds().upper().to_vec()).unwrap(),
            ..Default::default()
        };
        let f = frame(0, &Homography::identity());
        assert!(matches!(
            run_dynamic(std::slice::from_ref(&f), &bad),
            Err(RunnerError::ConfigInvalid(_))
        ));
        assert!(matches!(
            run_dynamic(&[f.clone(), f], &cfg),
            Err(RunnerError::FrameOrder { prev: 0, next: 0 })
        ));
    }

    #[test]
    fn summary_examples() {
        let mut trace = DynamicTrace::default();
        for (v, b) in [(10.0, 10.0), (4.0, 4.0), (6.0, 4.0), (1.0, 1.0)] {
            trace.push(0, 0, v, b, trace.is_empty());
        }
        let s = trace_summary(&trace).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].final_best_loss, 1.0);
        assert_eq!(s[0].peak_loss, 10.0);
        assert_eq!(s[0].evaluations_to_within_5pct, 4);
        assert_eq!(trace_summary(&DynamicTrace::default()), Err(EmptyTrace));
    }
}
