use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sim_uplink::channel::{complex_normal, NoiseBudget};
use sim_uplink::combiner::{compose_sim, matched_filter_phases, PhaseProfile};
use sim_uplink::geometry::PropagationStack;
use sim_uplink::harness::gradcheck::{finite_difference, relative_error, RandomInstance};
use sim_uplink::harness::{gradient_check, gradient_check_with, GradCheckConfig};
use sim_uplink::metrics::sinr;
use sim_uplink::optim::*;
use sim_uplink::{CMatrix, Result};

fn unit_noise() -> NoiseBudget {
    NoiseBudget {
        antenna_noise: 0.1,
        rf_noise: 0.1,
        transmit_flux: 1.0,
        effective_area: 1.0,
        transmission_efficiency: 0.8,
        element_efficiency: 1.0,
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let report = gradient_check(&GradCheckConfig::default()).unwrap();
    assert_eq!(report.instances.len(), 20);
    assert!(report.passed(), "worst relative error {}", report.worst());
    assert!(report.instances.iter().all(|i| i.layers <= 4 && i.cells <= 16 && i.users <= 3));
}

#[test]
fn gradient_check_catches_a_broken_gradient() {
    let cfg = GradCheckConfig { instances: 3, ..Default::default() };
    let report = gradient_check_with(&cfg, |inst| {
        let mut g = analytic_gradient(&inst.stack, &inst.phases, &inst.h, &inst.noise, &inst.factor)?;
        g[0] *= 1.01;
        Ok(g)
    })
    .unwrap();
    assert!(!report.passed());
}

#[test]
fn gradient_with_correlated_noise_and_interference() {
    // large antenna noise makes the colored-noise term dominate
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut inst = RandomInstance::draw(3, 9, 3, &mut rng).unwrap();
    inst.noise.antenna_noise = 5.0;
    inst.noise.rf_noise = 1e-3;
    let problem = inst.problem().unwrap();
    let analytic = problem.gradient(inst.phases.as_slice()).unwrap();
    let fd = finite_difference(&problem, &inst.phases, 1e-6).unwrap();
    assert!(relative_error(&analytic, &fd) < 1e-5);
}

fn random_stack(layers: usize, cells: usize, users: usize, rng: &mut ChaCha8Rng) -> (PropagationStack, CMatrix) {
    let inst = RandomInstance::draw(layers, cells, users, rng).unwrap();
    (inst.stack, inst.h)
}

#[test]
fn ascent_is_monotone_and_beats_its_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = CMatrix::identity(6, 6);
    for users in 1..=2 {
        let (stack, h) = random_stack(2, 6, users, &mut rng);
        let noise = unit_noise();
        let problem = SumRateProblem::new(&stack, &h, &noise, &f).unwrap();
        for method in [Method::GradientAscent, Method::QuasiNewton] {
            let cfg = match method {
                Method::GradientAscent => OptimizerConfig::gradient_ascent(users),
                Method::QuasiNewton => OptimizerConfig::quasi_newton(users),
            };
            let (phases, trace) = optimize_phases(&problem, method, &cfg, None).unwrap();
            assert!(trace.values.windows(2).all(|w| w[1] >= w[0]));
            assert!(trace.final_value() >= trace.values[0]);
            let direct = problem.sum_rate(&phases).unwrap();
            assert!((direct - trace.final_value()).abs() <= 1e-9 * direct.abs());
            assert!(phases.as_slice().iter().all(|v| (0.0..TAU).contains(v)));
        }
    }
}

/// For one layer and one user the optimum is per-cell phase alignment, and
/// the achieved amplitude is the sum of coupling-times-channel magnitudes.
#[test]
fn single_layer_single_user_reaches_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (stack, h) = random_stack(1, 8, 1, &mut rng);
    let f = CMatrix::identity(8, 8);
    let noise = unit_noise();
    let oracle_amp: f64 = (0..8).map(|n| stack.p(1)[(0, n)].norm() * h[(n, 0)].norm()).sum::<f64>() * noise.transmission_efficiency.sqrt();

    let mf = matched_filter_phases(&stack, &h, 0).unwrap();
    let g = compose_sim(&stack, &mf.phases, noise.transmission_efficiency).unwrap();
    assert!(((&g.g * &h)[(0, 0)].norm() - oracle_amp).abs() < 1e-12);

    // with white noise, alignment is also the sum-rate optimum
    let problem = SumRateProblem::new(&stack, &h, &noise, &f).unwrap();
    let mf_rate = problem.sum_rate(&mf.phases).unwrap();
    let (_, trace) = optimize_phases(&problem, Method::GradientAscent, &OptimizerConfig::gradient_ascent(1), None).unwrap();
    assert!((trace.final_value() - mf_rate).abs() <= 1e-6 * mf_rate, "{} vs {mf_rate}", trace.final_value());
}

/// Three phases, exhaustive 64^3 grid search as the oracle; the optimiser
/// must land within the grid's resolution of the best grid point.
#[test]
fn small_problem_against_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (stack, h) = random_stack(3, 1, 1, &mut rng);
    let f = CMatrix::identity(1, 1);
    let noise = unit_noise();
    let problem = SumRateProblem::new(&stack, &h, &noise, &f).unwrap();
    let steps = 64;
    let mut best = f64::NEG_INFINITY;
    for a in 0..steps {
        for b in 0..steps {
            for c in 0..steps {
                let v = [a, b, c].map(|i| i as f64 * TAU / steps as f64).to_vec();
                best = best.max(problem.value(&v).unwrap());
            }
        }
    }
    for method in [Method::GradientAscent, Method::QuasiNewton] {
        let cfg = OptimizerConfig { seed: 3, ..OptimizerConfig::gradient_ascent(1) };
        let (_, trace) = optimize_phases(&problem, method, &cfg, None).unwrap();
        assert!(trace.final_value() >= best - 1e-9, "{method:?}: {} < {best}", trace.final_value());
    }
}

#[test]
fn sum_rate_is_two_pi_periodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let inst = RandomInstance::draw(3, 5, 2, &mut rng).unwrap();
    let problem = inst.problem().unwrap();
    let base = problem.sum_rate(&inst.phases).unwrap();
    let shifted: Vec<f64> = inst.phases.as_slice().iter().map(|v| v + TAU * rng.random_range(-3..=3) as f64).collect();
    let shifted = PhaseProfile::new(3, 5, shifted).unwrap();
    assert!((problem.sum_rate(&shifted).unwrap() - base).abs() < 1e-12 * base);
}

#[test]
fn common_phase_on_the_outer_layer_does_not_change_the_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let inst = RandomInstance::draw(2, 6, 2, &mut rng).unwrap();
    let problem = inst.problem().unwrap();
    let base = problem.sum_rate(&inst.phases).unwrap();
    let mut rotated = inst.phases.clone();
    rotated.layer_mut(2).iter_mut().for_each(|v| *v += 0.7);
    assert!((problem.sum_rate(&rotated).unwrap() - base).abs() < 1e-12 * base);
}

/// A separable periodic objective with a known optimum, used to compare the
/// two optimisers without any SIM physics.
struct Cosines {
    targets: Vec<f64>,
}

impl Objective for Cosines {
    fn dim(&self) -> usize {
        self.targets.len()
    }
    fn block_len(&self) -> usize {
        self.targets.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter().zip(&self.targets).map(|(a, t)| (a - t).cos()).sum())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().zip(&self.targets).map(|(a, t)| -(a - t).sin()).collect())
    }
}

#[test]
fn both_optimisers_solve_a_known_periodic_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let targets: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..TAU)).collect();
    let obj = Cosines { targets: targets.clone() };
    let init: Vec<f64> = targets.iter().map(|t| t + rng.random_range(-1.2..1.2)).collect();
    let (_, ga) = gradient_ascent(&obj, init.clone(), &OptimizerConfig::gradient_ascent(1)).unwrap();
    let (_, qn) = quasi_newton(&obj, init, &OptimizerConfig::quasi_newton(1)).unwrap();
    assert!(ga.final_value() > 10.0 - 1e-6, "{}", ga.final_value());
    assert!(qn.final_value() > 10.0 - 1e-6, "{}", qn.final_value());
    assert!(qn.iterations() <= ga.iterations().max(1) * 2);
}

#[test]
fn stationary_start_stalls_immediately() {
    let obj = Cosines { targets: vec![0.0, 0.0] };
    let (x, trace) = gradient_ascent(&obj, vec![0.0, 0.0], &OptimizerConfig::gradient_ascent(1)).unwrap();
    assert_eq!(x, vec![0.0, 0.0]);
    assert_eq!(trace.termination, TerminationReason::Stalled);
    assert_eq!(trace.iterations(), 0);
}

#[test]
fn optimiser_dominates_matched_filter_on_a_random_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 8;
    let (stack, h) = random_stack(2, n, 1, &mut rng);
    let f = CMatrix::from_fn(n, n, |i, j| if i >= j { complex_normal(&mut rng) * 0.3 } else { 0.0.into() });
    let noise = unit_noise();
    let problem = SumRateProblem::new(&stack, &h, &noise, &f).unwrap();
    let mf = matched_filter_phases(&stack, &h, 0).unwrap();
    let mf_rate = problem.sum_rate(&mf.phases).unwrap();
    let (_, trace) = optimize_phases(&problem, Method::GradientAscent, &OptimizerConfig::gradient_ascent(1), Some(mf.phases)).unwrap();
    assert!(trace.final_value() >= mf_rate);
    let g = compose_sim(&stack, &PhaseProfile::zeros(2, n), 0.8).unwrap();
    assert!(sinr(&g.g, &h, &noise, &f).unwrap().sum_rate.is_finite());
}
