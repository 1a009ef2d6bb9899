//! Sum-rate maximisation over every unit-cell phase.
//!
//! Both optimisers work on a flattened, layer-major phase vector through the
//! [`Objective`] trait, so they can be exercised on synthetic objectives as
//! well as on the SIM sum-rate ([`SumRateProblem`]).

mod ascent;
mod gradient;
mod line_search;
mod quasi_newton;

pub use ascent::gradient_ascent;
pub use gradient::{analytic_gradient, normalize_gradient, SumRateProblem};
pub use line_search::{two_way_backtracking, LineSearchConfig, LineSearchOutcome};
pub use quasi_newton::quasi_newton;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combiner::PhaseProfile;
use crate::{Error, Result};

/// A smooth function of a block-structured parameter vector, to be maximised.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Length of each normalisation block (one metasurface layer).
    fn block_len(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Initial line-search step.
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Stop when the relative gain over `patience` iterations drops below this.
    pub rel_improvement_tol: f64,
    pub patience: usize,
    /// Also try the mirrored step `-mu * d` after each line search.
    pub mirrored_probe: bool,
    /// Number of curvature pairs kept by the quasi-Newton method.
    pub memory: usize,
    /// Seed for the random initial phases.
    pub seed: u64,
}

impl OptimizerConfig {
    /// Gradient-ascent defaults; the initial step depends on the user count.
    pub fn gradient_ascent(users: usize) -> Self {
        Self {
            max_iterations: 500,
            initial_step: if users <= 1 { 1.8 } else { 2.2 },
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            min_step: 1e-12,
            max_step: 1e6,
            rel_improvement_tol: 1e-6,
            patience: 10,
            mirrored_probe: true,
            memory: 10,
            seed: 0,
        }
    }

    pub fn quasi_newton(users: usize) -> Self {
        Self { max_iterations: 100, mirrored_probe: false, ..Self::gradient_ascent(users) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("optimizer.max_iterations", "must be at least 1"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::config("optimizer.backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::config("optimizer.armijo_c", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::config("optimizer.initial_step", "must be positive"));
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return Err(Error::config("optimizer.min_step", "must be positive and below max_step"));
        }
        if self.patience == 0 {
            return Err(Error::config("optimizer.patience", "must be at least 1"));
        }
        if self.memory == 0 {
            return Err(Error::config("optimizer.memory", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn line_search(&self, mirrored_probe: bool) -> LineSearchConfig {
        LineSearchConfig {
            backtrack_factor: self.backtrack_factor,
            armijo_c: self.armijo_c,
            min_step: self.min_step,
            max_step: self.max_step,
            mirrored_probe,
        }
    }

    /// Uniform random phases on `[0, 2 pi)` from this config's seed.
    pub fn random_init(&self, layers: usize, cells: usize) -> PhaseProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        PhaseProfile::random(layers, cells, &mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxIterations,
    /// Relative improvement stayed below tolerance for the patience window.
    Converged,
    /// The line search found no improving step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerTrace {
    /// Objective at the initial point followed by one entry per accepted step.
    pub values: Vec<f64>,
    /// Signed accepted step per iteration.
    pub steps: Vec<f64>,
    /// Max-abs gradient entry of each layer, per iteration.
    pub layer_gradient_norms: Vec<Vec<f64>>,
    pub termination: TerminationReason,
    pub evaluations: usize,
}

impl OptimizerTrace {
    pub(crate) fn new(initial: f64) -> Self {
        Self {
            values: vec![initial],
            steps: Vec::new(),
            layer_gradient_norms: Vec::new(),
            termination: TerminationReason::MaxIterations,
            evaluations: 1,
        }
    }

    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace starts with the initial value")
    }

    /// Whether the last `patience` iterations improved by less than `tol`
    /// relative to the value `patience` iterations ago.
    pub(crate) fn plateaued(&self, patience: usize, tol: f64) -> bool {
        let n = self.values.len();
        if n <= patience {
            return false;
        }
        let old = self.values[n - 1 - patience];
        let new = self.values[n - 1];
        new - old <= tol * old.abs().max(f64::MIN_POSITIVE)
    }
}

pub(crate) fn block_max_abs(grad: &[f64], block_len: usize) -> Vec<f64> {
    grad.chunks(block_len.max(1))
        .map(|b| b.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect()
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} evaluated to {value}")))
    }
}

/// Runs either optimiser on the SIM sum-rate and returns wrapped phases.
pub fn optimize_phases(
    problem: &SumRateProblem<'_>,
    method: Method,
    config: &OptimizerConfig,
    init: Option<PhaseProfile>,
) -> Result<(PhaseProfile, OptimizerTrace)> {
    let (layers, cells) = (problem.layers(), problem.cells());
    let init = init.unwrap_or_else(|| config.random_init(layers, cells));
    let x0 = init.into_vec();
    let (x, trace) = match method {
        Method::GradientAscent => gradient_ascent(problem, x0, config)?,
        Method::QuasiNewton => quasi_newton(problem, x0, config)?,
    };
    Ok((PhaseProfile::new(layers, cells, x)?.wrapped(), trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GradientAscent,
    QuasiNewton,
}
