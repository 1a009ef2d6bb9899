use std::collections::VecDeque;

use super::{block_max_abs, ensure_finite, normalize_gradient, two_way_backtracking, Objective, OptimizerConfig, OptimizerTrace, TerminationReason};
use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: applies the inverse-Hessian estimate of `-f` to `grad`.
fn lbfgs_direction(history: &VecDeque<CurvaturePair>, grad: &[f64]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (pair, a) in history.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        q.iter_mut().zip(&pair.s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q
}

/// Limited-memory BFGS ascent over the unconstrained phases.
///
/// Until a curvature pair with `s^T y > 0` is available, and whenever the
/// quasi-Newton direction fails to be an ascent direction, the method falls
/// back to the layer-normalised gradient step used by gradient ascent.
pub fn quasi_newton<O: Objective + ?Sized>(
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
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(config.memory);
    let mut x = init;
    let mut f = ensure_finite(objective.value(&x)?, "objective")?;
    let mut grad = objective.gradient(&x)?;
    let mut trace = OptimizerTrace::new(f);
    let mut fallback_step = config.initial_step;

    for _ in 0..config.max_iterations {
        trace.layer_gradient_norms.push(block_max_abs(&grad, block));
        let mut quasi_newton_step = false;
        let mut direction = Vec::new();
        if !history.is_empty() {
            direction = lbfgs_direction(&history, &grad);
            quasi_newton_step = dot(&direction, &grad) > 0.0 && direction.iter().all(|v| v.is_finite());
        }
        if !quasi_newton_step {
            direction = grad.clone();
            normalize_gradient(&mut direction, block);
        }
        let initial = if quasi_newton_step { 1.0 } else { fallback_step };

        let out = two_way_backtracking(|p| objective.value(p), &x, f, &grad, &direction, initial, &ls)?;
        trace.evaluations += out.evaluations;
        if out.stalled {
            trace.termination = TerminationReason::Stalled;
            break;
        }
        if !quasi_newton_step {
            fallback_step = out.step.abs();
        }
        let s: Vec<f64> = direction.iter().map(|d| out.step * d).collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        f = out.value;
        let new_grad = objective.gradient(&x)?;
        // curvature of -f: y = -(g_new - g_old)
        let y: Vec<f64> = grad.iter().zip(&new_grad).map(|(o, n)| o - n).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy.is_finite() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
        }
        grad = new_grad;
        trace.values.push(f);
        trace.steps.push(out.step);
        if trace.plateaued(config.patience, config.rel_improvement_tol) {
            trace.termination = TerminationReason::Converged;
            break;
        }
    }
    Ok((x, trace))
}
