use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub mirrored_probe: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { backtrack_factor: 0.5, armijo_c: 1e-4, min_step: 1e-12, max_step: 1e6, mirrored_probe: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    /// Signed step along the search direction; 0 when stalled.
    pub step: f64,
    /// Objective at the accepted point (the starting value when stalled).
    pub value: f64,
    pub stalled: bool,
    pub evaluations: usize,
}

fn axpy(x: &[f64], step: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + step * b).collect()
}

/// Two-way backtracking for maximisation under the Armijo condition
/// `f(x + mu d) >= f(x) + c mu <grad, d>`.
///
/// Starting at `initial_step`, the step grows by `1 / backtrack_factor` for as
/// long as the condition keeps holding, or shrinks by `backtrack_factor` until
/// it holds. With `mirrored_probe`, the opposite step `-mu d` is evaluated at
/// the accepted length and kept if it scores higher.
pub fn two_way_backtracking<F>(
    mut objective: F,
    x: &[f64],
    f0: f64,
    grad: &[f64],
    direction: &[f64],
    initial_step: f64,
    cfg: &LineSearchConfig,
) -> Result<LineSearchOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let slope: f64 = grad.iter().zip(direction).map(|(g, d)| g * d).sum();
    let stall = |evaluations| LineSearchOutcome { step: 0.0, value: f0, stalled: true, evaluations };
    if !(slope > 0.0 && slope.is_finite()) {
        return Ok(stall(0));
    }
    let mut evaluations = 0;
    let mut eval = |mu: f64| -> Result<f64> {
        evaluations += 1;
        objective(&axpy(x, mu, direction))
    };
    let armijo = |mu: f64, f: f64| f.is_finite() && f >= f0 + cfg.armijo_c * mu * slope;

    let mut mu = initial_step.clamp(cfg.min_step, cfg.max_step);
    let mut f = eval(mu)?;
    if armijo(mu, f) {
        loop {
            let bigger = mu / cfg.backtrack_factor;
            if bigger > cfg.max_step {
                break;
            }
            let fb = eval(bigger)?;
            if !armijo(bigger, fb) {
                break;
            }
            mu = bigger;
            f = fb;
        }
    } else {
        loop {
            mu *= cfg.backtrack_factor;
            if mu < cfg.min_step {
                return Ok(stall(evaluations));
            }
            f = eval(mu)?;
            if armijo(mu, f) {
                break;
            }
        }
    }

    let mut step = mu;
    if cfg.mirrored_probe {
        let fm = eval(-mu)?;
        if fm.is_finite() && fm > f {
            step = -mu;
            f = fm;
        }
    }
    Ok(LineSearchOutcome { step, value: f, stalled: false, evaluations })
}
