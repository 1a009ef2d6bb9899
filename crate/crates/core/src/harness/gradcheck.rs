//! Finite-difference check of the analytic sum-rate gradient on random,
//! well-scaled instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::GradCheckConfig;
use crate::channel::{complex_normal, NoiseBudget};
use crate::combiner::PhaseProfile;
use crate::geometry::PropagationStack;
use crate::optim::{analytic_gradient, SumRateProblem};
use crate::{CMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckInstance {
    pub layers: usize,
    pub cells: usize,
    pub users: usize,
    /// Largest `|analytic - fd| / (1e-8 + |fd|)` over all coordinates.
    pub max_relative_error: f64,
    /// Largest absolute gradient entry, for scale.
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub instances: Vec<GradCheckInstance>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.instances.iter().map(|i| i.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= self.tolerance
    }
}

/// A random problem: stack entries and channel entries are `CN(0, 1/N)`,
/// unit noise powers and a lower-triangular correlation factor with unit
/// diagonal, so that SINRs are of order one.
pub struct RandomInstance {
    pub stack: PropagationStack,
    pub h: CMatrix,
    pub noise: NoiseBudget,
    pub factor: CMatrix,
    pub phases: PhaseProfile,
}

impl RandomInstance {
    pub fn draw<R: Rng + ?Sized>(layers: usize, cells: usize, users: usize, rng: &mut R) -> Result<Self> {
        let scale = (cells as f64).sqrt().recip();
        let mut random = |rows: usize, cols: usize| CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng) * scale);
        let mut matrices = vec![random(users, cells)];
        for _ in 1..layers {
            matrices.push(random(cells, cells));
        }
        let h = random(cells, users);
        let mut factor = random(cells, cells);
        for i in 0..cells {
            factor[(i, i)] = 1.0.into();
            for j in i + 1..cells {
                factor[(i, j)] = 0.0.into();
            }
        }
        let stack = PropagationStack::from_matrices(matrices)?;
        let phases = PhaseProfile::random(layers, cells, rng);
        let noise = NoiseBudget {
            antenna_noise: 0.1,
            rf_noise: 0.1,
            transmit_flux: 1.0,
            effective_area: 1.0,
            transmission_efficiency: 0.8,
            element_efficiency: 1.0,
        };
        Ok(Self { stack, h, noise, factor, phases })
    }

    pub fn problem(&self) -> Result<SumRateProblem<'_>> {
        SumRateProblem::new(&self.stack, &self.h, &self.noise, &self.factor)
    }
}

/// Central differences of `problem` at `phases` with step `h`.
pub fn finite_difference(problem: &SumRateProblem<'_>, phases: &PhaseProfile, h: f64) -> Result<Vec<f64>> {
    let base = phases.as_slice().to_vec();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let layers = phases.layers();
        let cells = phases.cells();
        let fp = problem.sum_rate(&PhaseProfile::new(layers, cells, plus)?)?;
        let fm = problem.sum_rate(&PhaseProfile::new(layers, cells, minus)?)?;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

pub fn relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic.iter().zip(fd).map(|(a, f)| (a - f).abs() / (1e-8 + f.abs())).fold(0.0, f64::max)
}

/// Checks `gradient` against central differences on `cfg.instances` random
/// problems with at least two cells per layer. The hook makes it possible to verify that the check catches a
/// broken gradient.
pub fn gradient_check_with<G>(cfg: &GradCheckConfig, mut gradient: G) -> Result<GradCheckReport>
where
    G: FnMut(&RandomInstance) -> Result<Vec<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.instances);
    for _ in 0..cfg.instances {
        let layers = rng.random_range(1..=cfg.max_layers);
        let users = rng.random_range(1..=cfg.max_users);
        // a single cell makes every phase a global rotation with zero gradient
        let min_cells = users.max(2).min(cfg.max_cells.max(1));
        let cells = rng.random_range(min_cells..=cfg.max_cells.max(min_cells));
        let inst = RandomInstance::draw(layers, cells, users, &mut rng)?;
        let analytic = gradient(&inst)?;
        let fd = finite_difference(&inst.problem()?, &inst.phases, cfg.step)?;
        instances.push(GradCheckInstance {
            layers,
            cells,
            users,
            max_relative_error: relative_error(&analytic, &fd),
            max_abs_gradient: analytic.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        });
    }
    Ok(GradCheckReport { tolerance: cfg.tolerance, instances })
}

pub fn gradient_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    gradient_check_with(cfg, |inst| analytic_gradient(&inst.stack, &inst.phases, &inst.h, &inst.noise, &inst.factor))
}
