use super::{Evaluator, FdaConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct IlsOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Coordinate pattern search in normalized coordinates.
///
/// `start_value` must be the objective at `start` (clamped to `[-1, 1]^D`);
/// it is not re-evaluated. With a zero budget the start is returned as is.
pub fn ils<F>(
    objective: F,
    start: &[f64],
    start_value: f64,
    cfg: &FdaConfig,
    budget: usize,
) -> IlsOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let start: Vec<f64> = start.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let mut evaluator = Evaluator::new(objective, budget);
    let (point, value) = local_search(&mut evaluator, start, start_value, cfg);
    IlsOutcome {
        point,
        value,
        evaluations: evaluator.used(),
    }
}

/// Tries `x ± step·e_d` dimension by dimension, moving on the first strict
/// improvement and restarting the sweep from the first dimension. A sweep
/// without improvement shrinks the step; the search ends below
/// `ils_min_step` or when the budget runs out.
pub(crate) fn local_search<F>(
    evaluator: &mut Evaluator<'_, F>,
    mut x: Vec<f64>,
    mut fx: f64,
    cfg: &FdaConfig,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut step = cfg.ils_initial_step;
    let mut candidate = x.clone();
    while step >= cfg.ils_min_step {
        let mut improved = false;
        'sweep: for d in 0..x.len() {
            for sign in [1.0, -1.0] {
                let moved = (x[d] + sign * step).clamp(-1.0, 1.0);
                if moved == x[d] {
                    continue;
                }
                candidate[d] = moved;
                let Some(value) = evaluator.eval(&candidate) else {
                    return (x, fx);
                };
                if value < fx {
                    x[d] = moved;
                    fx = value;
                    improved = true;
                    break 'sweep;
                }
                candidate[d] = x[d];
            }
        }
        if !improved {
            step *= cfg.ils_step_decay;
        }
    }
    (x, fx)
}
