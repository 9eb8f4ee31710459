//! Fractal Decomposition Algorithm.
//!
//! The normalized search cube `[-1, 1]^D` is covered by a unit ball that is
//! recursively split into `2·D` inflated child balls. Nodes are expanded
//! best-first by the objective value at their center; nodes at the deepest
//! level are refined with an intensive local search (a coordinate pattern
//! search with geometric step decay) instead of being split further.
//!
//! The core is fully deterministic. Child evaluations of one decomposition
//! may run on a thread pool, their results are merged in child order so the
//! outcome is bit-identical whatever the worker count.

mod ils;
mod space;
mod tree;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ils::{ils, IlsOutcome};
pub use space::SearchSpace;
pub use tree::{decompose, radius_at_depth, HypersphereNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdaError {
    #[error("evaluation budget {budget} is below the minimum {required} (2 * D * max_depth)")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("node is already at the maximum depth {0}")]
    MaxDepthReached(usize),
    #[error("point {0:?} lies outside the search space")]
    OutOfBounds(Vec<f64>),
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdaConfig {
    pub max_depth: usize,
    /// Child radius multiplier, `> 1`.
    pub inflation: f64,
    /// Initial local-search step in normalized units.
    pub ils_initial_step: f64,
    pub ils_step_decay: f64,
    pub ils_min_step: f64,
    pub eval_budget: usize,
    /// Reserved for stochastic variants; the search itself draws no randomness.
    pub rng_seed: u64,
    /// Worker threads for child evaluation, `0` evaluates on the caller's thread.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for FdaConfig {
    fn default() -> Self {
        Self {
            max_depth: 4,
            inflation: 1.75,
            ils_initial_step: 0.1,
            ils_step_decay: 0.5,
            ils_min_step: 1e-9,
            eval_budget: 20_000,
            rng_seed: 0,
            threads: 0,
        }
    }
}

impl FdaConfig {
    /// Checks the scalar fields. The budget is checked against the
    /// dimension in [`explore`].
    pub fn validate(&self) -> Result<(), FdaError> {
        let bad = |msg: &str| Err(FdaError::InvalidConfig(msg.to_string()));
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.inflation.is_finite() && self.inflation > 1.0) {
            return bad("inflation must be > 1");
        }
        if !(self.ils_initial_step.is_finite() && self.ils_initial_step > 0.0) {
            return bad("ils_initial_step must be positive");
        }
        if !(self.ils_step_decay > 0.0 && self.ils_step_decay < 1.0) {
            return bad("ils_step_decay must be in (0, 1)");
        }
        if !(self.ils_min_step.is_finite() && self.ils_min_step > 0.0) {
            return bad("ils_min_step must be positive");
        }
        if self.eval_budget == 0 {
            return bad("eval_budget must be positive");
        }
        Ok(())
    }

    pub fn min_budget(&self, dim: usize) -> usize {
        2 * dim * self.max_depth
    }
}

/// One objective call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub evaluation_index: usize,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// In original (denormalized) coordinates.
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub trace: Vec<TraceEntry>,
}

/// Budgeted objective wrapper over normalized coordinates. Every call is
/// recorded in the trace and the incumbent is updated on strict improvement.
pub(crate) struct Evaluator<'a, F> {
    objective: F,
    budget: usize,
    trace: Vec<TraceEntry>,
    best: Option<(Vec<f64>, f64)>,
    pool: Option<&'a rayon::ThreadPool>,
}

impl<'a, F: Fn(&[f64]) -> f64> Evaluator<'a, F> {
    pub(crate) fn new(objective: F, budget: usize) -> Self {
        Self {
            objective,
            budget,
            trace: Vec::new(),
            best: None,
            pool: None,
        }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.budget - self.trace.len()
    }

    pub(crate) fn used(&self) -> usize {
        self.trace.len()
    }

    fn record(&mut self, point: &[f64], value: f64) {
        let improves = match &self.best {
            None => true,
            Some((_, b)) => value < *b,
        };
        if improves {
            self.best = Some((point.to_vec(), value));
        }
        let best_so_far = self.best.as_ref().map_or(value, |(_, b)| *b);
        self.trace.push(TraceEntry {
            evaluation_index: self.trace.len(),
            value,
            best_so_far,
        });
    }

    /// Returns `None` once the budget is spent.
    pub(crate) fn eval(&mut self, point: &[f64]) -> Option<f64> {
        if self.remaining() == 0 {
            return None;
        }
        let value = (self.objective)(point);
        self.record(point, value);
        Some(value)
    }
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Evaluator<'a, F> {
    /// Evaluates as many of `points` as the budget allows, in order.
    fn eval_batch(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        let n = points.len().min(self.remaining());
        let points = &points[..n];
        let values: Vec<f64> = match self.pool {
            Some(pool) => {
                let objective = &self.objective;
                pool.install(|| points.par_iter().map(|p| objective(p)).collect())
            }
            None => points.iter().map(|p| (self.objective)(p)).collect(),
        };
        for (p, v) in points.iter().zip(&values) {
            self.record(p, *v);
        }
        values
    }
}

/// Queue entry ordered so that `BinaryHeap` pops the lowest quality first,
/// ties broken by insertion order.
struct Queued {
    quality: f64,
    seq: usize,
    node: HypersphereNode,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .quality
            .total_cmp(&self.quality)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Minimizes `objective` over `space` within `cfg.eval_budget` calls.
///
/// When `warm_start` is given it is evaluated first and enqueued as a
/// deepest-level node, so it is refined by local search as soon as it is
/// the best open node.
pub fn explore<F>(
    objective: F,
    space: &SearchSpace,
    cfg: &FdaConfig,
    warm_start: Option<&[f64]>,
) -> Result<OptimizationResult, FdaError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = space.dim();
    let required = cfg.min_budget(dim);
    if cfg.eval_budget < required {
        return Err(FdaError::BudgetTooSmall {
            budget: cfg.eval_budget,
            required,
        });
    }
    let warm = warm_start.map(|w| space.normalize(w)).transpose()?;

    let pool = if cfg.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| FdaError::InvalidConfig(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let normalized = |v: &[f64]| objective(&space.denormalize(v));
    let mut evaluator = Evaluator::new(normalized, cfg.eval_budget);
    evaluator.pool = pool.as_ref();

    let mut queue = BinaryHeap::new();
    let mut seq = 0usize;
    let mut push = |queue: &mut BinaryHeap<Queued>, node: HypersphereNode| {
        let quality = node.quality.unwrap_or(f64::INFINITY);
        queue.push(Queued { quality, seq, node });
        seq += 1;
    };

    if let Some(w) = warm {
        let value = evaluator.eval(&w).expect("budget checked above");
        let node = HypersphereNode {
            center: w,
            radius: radius_at_depth(cfg.max_depth, cfg.inflation),
            depth: cfg.max_depth,
            quality: Some(value),
        };
        push(&mut queue, node);
    }
    let mut root = HypersphereNode::root(dim);
    if let Some(value) = evaluator.eval(&root.center) {
        root.quality = Some(value);
        push(&mut queue, root);
    }

    while evaluator.remaining() > 0 {
        let Some(Queued { node, .. }) = queue.pop() else {
            break;
        };
        if node.depth >= cfg.max_depth {
            let start = node.clamped_center();
            let value = node.quality.expect("queued nodes are evaluated");
            ils::local_search(&mut evaluator, start, value, cfg);
            continue;
        }
        let children = decompose(&node, cfg.inflation, cfg.max_depth)?;
        let centers: Vec<Vec<f64>> = children.iter().map(|c| c.clamped_center()).collect();
        let values = evaluator.eval_batch(&centers);
        for (mut child, value) in children.into_iter().zip(values) {
            child.quality = Some(value);
            push(&mut queue, child);
        }
    }

    let evaluations_used = evaluator.used();
    let (best_norm, best_value) = evaluator.best.expect("at least one evaluation");
    Ok(OptimizationResult {
        best_point: space.denormalize(&best_norm),
        best_value,
        evaluations_used,
        trace: evaluator.trace,
    })
}
