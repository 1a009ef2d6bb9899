use super::{block_max_abs, ensure_finite, normalize_gradient, two_way_backtracking, Objective, OptimizerConfig, OptimizerTrace, TerminationReason};
use crate::{Error, Result};

/// Gradient ascent with per-layer gradient normalisation and a two-way
/// backtracking line search; all parameters move simultaneously.
///
/// The first line search starts from `config.initial_step`, later ones from
/// the previously accepted step length.
pub fn gradient_ascent<O: Objective + ?Sized>(
    objective: &O,
    init: Vec<f64>,
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, OptimizerTrace)> {
    config.validate()?;
    if init.len() != objective.dim() {
        return Err(Error::DimensionMismatch { what: "initial point", expected: objective.dim(), found: init.len() });
    }
    let block = objective.block_len();
    let ls = config.line_search(config.mirrored_probe);
    let mut x = init;
    let mut f = ensure_finite(objective.value(&x)?, "objective")?;
    let mut trace = OptimizerTrace::new(f);
    let mut step = config.initial_step;

    for _ in 0..config.max_iterations {
        let grad = objective.gradient(&x)?;
        trace.layer_gradient_norms.push(block_max_abs(&grad, block));
        let mut direction = grad.clone();
        normalize_gradient(&mut direction, block);

        let out = two_way_backtracking(|p| objective.value(p), &x, f, &grad, &direction, step, &ls)?;
        trace.evaluations += out.evaluations;
        if out.stalled {
            trace.termination = TerminationReason::Stalled;
            break;
        }
        for (xi, di) in x.iter_mut().zip(&direction) {
            *xi += out.step * di;
        }
        f = out.value;
        step = out.step.abs();
        trace.values.push(f);
        trace.steps.push(out.step);
        if trace.plateaued(config.patience, config.rel_improvement_tol) {
            trace.termination = TerminationReason::Converged;
            break;
        }
    }
    Ok((x, trace))
}
