//! Monte Carlo campaigns over placements, realizations, layer counts,
//! transmit powers and methods.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ChannelSource, ExperimentConfig, MethodKind};
use crate::channel::{
    antenna_noise_power, build_channel, build_correlation, dbm_to_watts, import_channels, path_loss, rf_noise_power,
    ChannelEnsemble, CorrelationModel, NoiseBudget,
};
use crate::combiner::{compose_sim, dpa_mrc, dpa_zf, matched_filter_phases, PhaseProfile};
use crate::geometry::{build_geometry, build_propagation_stack, square_grid, DpaLayout, PhysicalConstants, PropagationStack};
use crate::metrics::{sinr, sinr_digital, RateReport};
use crate::optim::{optimize_phases, Method, SumRateProblem};
use crate::rng::{stream, StreamPurpose};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub method: MethodKind,
    pub layers: usize,
    pub p_t_dbm_per_m2: f64,
    pub placement: u64,
    pub realization: u64,
    pub gamma: Vec<f64>,
    pub sum_rate: f64,
    pub iterations: usize,
    /// Wall time, present only when the config asks for it.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: MethodKind,
    pub layers: usize,
    pub p_t_dbm_per_m2: f64,
    pub count: usize,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub ci95: f64,
    /// Mean sum-rate times bandwidth, bit/s.
    pub mean_throughput_bps: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResults {
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<Aggregate>,
}

/// Which receiver a channel is drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Sim,
    DpaEqualAperture,
    DpaEqualRf,
}

impl Receiver {
    fn purpose(self) -> StreamPurpose {
        match self {
            Receiver::Sim => StreamPurpose::SimChannel,
            Receiver::DpaEqualAperture => StreamPurpose::DpaApertureChannel,
            Receiver::DpaEqualRf => StreamPurpose::DpaRfChannel,
        }
    }
}

#[derive(Debug, Clone)]
struct ReceiverSetup {
    correlation: CorrelationModel,
    /// Noise budget with a placeholder transmit flux.
    noise: NoiseBudget,
}

type ChannelIndex = HashMap<(u64, u64), ChannelEnsemble>;

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialKey {
    method: MethodKind,
    layers: usize,
    p_t_dbm: f64,
    placement: u64,
    realization: u64,
}

/// Everything shared across trials, built once per campaign.
pub struct Scenario {
    config: ExperimentConfig,
    constants: PhysicalConstants,
    sim: ReceiverSetup,
    stacks: BTreeMap<usize, PropagationStack>,
    dpa_aperture: ReceiverSetup,
    dpa_rf: ReceiverSetup,
    imported: Option<[ChannelIndex; 3]>,
    draws: Vec<(u64, u64)>,
}

fn dpa_grid(aperture: f64, wavelength: f64) -> Result<Vec<Point>> {
    let pitch = wavelength / 2.0;
    let side = (aperture / pitch + 1e-9).floor() as usize;
    if side == 0 {
        return Err(Error::config("geometry.aperture_wavelengths", "aperture too small for a half-wavelength DPA"));
    }
    Ok(square_grid(side, pitch, 0.0))
}

impl Scenario {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let constants = config.constants()?;
        let lam = constants.wavelength;
        let g = &config.geometry;
        let ph = &config.physics;
        let aperture = g.aperture_wavelengths * lam;
        let pitch = g.cell_pitch_wavelengths * lam;
        let thickness = g.thickness_wavelengths * lam;
        let k = config.users;

        let mut stacks = BTreeMap::new();
        let mut outer = Vec::new();
        for &layers in &config.layers {
            if stacks.contains_key(&layers) {
                continue;
            }
            let geom = build_geometry(&constants, aperture, pitch, layers, thickness, k, &DpaLayout::LinearHalfWavelength, g.dipole_axis)?;
            outer = geom.outer_layer().to_vec();
            let stack = build_propagation_stack(&geom, &constants, g.coupling)?;
            stacks.insert(layers, if g.enforce_passivity { stack.into_passive() } else { stack });
        }

        let rf = rf_noise_power(constants.bandwidth, ph.bs_temperature_k, ph.noise_figure_db);
        let cell_area = ph.cell_effective_area_m2.unwrap_or(pitch * pitch);
        let sim = ReceiverSetup {
            correlation: build_correlation(&outer, lam)?,
            noise: NoiseBudget {
                antenna_noise: antenna_noise_power(cell_area, lam, constants.bandwidth, ph.environment_temperature_k),
                rf_noise: rf,
                transmit_flux: 1.0,
                effective_area: cell_area,
                transmission_efficiency: ph.transmission_efficiency,
                element_efficiency: 1.0,
            },
        };
        let patch_noise = NoiseBudget {
            antenna_noise: antenna_noise_power(ph.patch_effective_area_m2, lam, constants.bandwidth, ph.environment_temperature_k),
            rf_noise: rf,
            transmit_flux: 1.0,
            effective_area: ph.patch_effective_area_m2,
            transmission_efficiency: 1.0,
            element_efficiency: ph.patch_efficiency,
        };
        let aperture_elements = dpa_grid(aperture, lam)?;
        if aperture_elements.len() < k {
            return Err(Error::config("users", "more users than equal-aperture DPA elements"));
        }
        let dpa_aperture = ReceiverSetup { correlation: build_correlation(&aperture_elements, lam)?, noise: patch_noise };
        let rf_geom = build_geometry(&constants, aperture, pitch, 1, thickness, k, &DpaLayout::LinearHalfWavelength, g.dipole_axis)?;
        let dpa_rf = ReceiverSetup { correlation: build_correlation(&rf_geom.dpa_element_positions, lam)?, noise: patch_noise };

        let n = sim.correlation.dim();
        let (imported, draws) = match &config.channel {
            ChannelSource::GenerateRayleigh => {
                let draws = (0..config.placements as u64)
                    .flat_map(|p| (0..config.realizations_per_placement as u64).map(move |r| (p, r)))
                    .collect();
                (None, draws)
            }
            ChannelSource::Import { path, dpa_equal_aperture_path, dpa_equal_rf_path } => {
                let sim_channels = import_channels(path, Some((n, k)))?;
                let draws: Vec<(u64, u64)> = sim_channels.iter().map(|e| (e.placement_id, e.realization_id)).collect();
                let index = |v: Vec<ChannelEnsemble>| -> ChannelIndex {
                    v.into_iter().map(|e| ((e.placement_id, e.realization_id), e)).collect()
                };
                let load = |p: &Option<std::path::PathBuf>, rows: usize| -> Result<ChannelIndex> {
                    match p {
                        Some(p) => Ok(index(import_channels(p, Some((rows, k)))?)),
                        None => Ok(HashMap::new()),
                    }
                };
                let aperture_idx = load(dpa_equal_aperture_path, dpa_aperture.correlation.dim())?;
                let rf_idx = load(dpa_equal_rf_path, dpa_rf.correlation.dim())?;
                (Some([index(sim_channels), aperture_idx, rf_idx]), draws)
            }
        };

        Ok(Self { config: config.clone(), constants, sim, stacks, dpa_aperture, dpa_rf, imported, draws })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn stack(&self, layers: usize) -> Option<&PropagationStack> {
        self.stacks.get(&layers)
    }

    pub fn sim_correlation(&self) -> &CorrelationModel {
        &self.sim.correlation
    }

    /// `(placement, realization)` pairs covered by the campaign.
    pub fn draws(&self) -> &[(u64, u64)] {
        &self.draws
    }

    fn setup(&self, receiver: Receiver) -> &ReceiverSetup {
        match receiver {
            Receiver::Sim => &self.sim,
            Receiver::DpaEqualAperture => &self.dpa_aperture,
            Receiver::DpaEqualRf => &self.dpa_rf,
        }
    }

    pub fn noise(&self, receiver: Receiver, p_t_dbm: f64) -> NoiseBudget {
        NoiseBudget { transmit_flux: dbm_to_watts(p_t_dbm), ..self.setup(receiver).noise }
    }

    /// User positions and path gains for one placement; shared by every
    /// receiver so that all methods see the same users.
    pub fn place_users(&self, placement: u64) -> Result<(Vec<Point>, Vec<f64>)> {
        let pl = &self.config.placement;
        let mut rng = stream(self.config.master_seed, StreamPurpose::Placement, placement, 0);
        let mut positions = Vec::with_capacity(self.config.users);
        let mut beta = Vec::with_capacity(self.config.users);
        for _ in 0..self.config.users {
            let d = if pl.max_distance_m > pl.min_distance_m {
                rng.random_range(pl.min_distance_m..pl.max_distance_m)
            } else {
                pl.min_distance_m
            };
            let azimuth = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            let p = Point::new(d * azimuth.sin(), pl.height_offset_m, d * azimuth.cos());
            beta.push(path_loss(p.coords.norm(), &self.config.path_loss)?);
            positions.push(p);
        }
        Ok((positions, beta))
    }

    /// Channel seen by `receiver` for one draw.
    pub fn channel(&self, receiver: Receiver, placement: u64, realization: u64) -> Result<ChannelEnsemble> {
        if let Some(imported) = &self.imported {
            let idx = match receiver {
                Receiver::Sim => 0,
                Receiver::DpaEqualAperture => 1,
                Receiver::DpaEqualRf => 2,
            };
            return imported[idx].get(&(placement, realization)).cloned().ok_or_else(|| {
                Error::config("channel", format!("no imported channel for placement {placement}, realization {realization}"))
            });
        }
        let (positions, beta) = self.place_users(placement)?;
        let setup = self.setup(receiver);
        let mut rng = stream(self.config.master_seed, receiver.purpose(), placement, realization);
        let mut ch = build_channel(&setup.correlation, &beta, &setup.noise, &mut rng)?;
        ch.user_positions = positions;
        ch.placement_id = placement;
        ch.realization_id = realization;
        Ok(ch)
    }

    pub fn channels(&self, receiver: Receiver) -> Result<Vec<ChannelEnsemble>> {
        self.draws.iter().map(|&(p, r)| self.channel(receiver, p, r)).collect()
    }

    fn evaluate(&self, key: &TrialKey) -> Result<(RateReport, usize)> {
        let k = self.config.users;
        match key.method {
            MethodKind::SimGa | MethodKind::SimQn | MethodKind::SimMf => {
                let ch = self.channel(Receiver::Sim, key.placement, key.realization)?;
                let stack = self.stacks.get(&key.layers).expect("stack built for every swept layer count");
                let noise = self.noise(Receiver::Sim, key.p_t_dbm);
                let factor = &self.sim.correlation.factor;
                let (phases, iterations) = match key.method {
                    MethodKind::SimMf => {
                        let target = if k == 1 {
                            0
                        } else {
                            let mut rng = stream(self.config.master_seed, StreamPurpose::MatchedFilterUser, key.placement, key.realization);
                            rng.random_range(0..k)
                        };
                        (matched_filter_phases(stack, &ch.h, target)?.phases, 0)
                    }
                    _ => {
                        let problem = SumRateProblem::new(stack, &ch.h, &noise, factor)?;
                        let mut rng = stream(self.config.master_seed, StreamPurpose::PhaseInit, key.placement, key.realization);
                        let init = PhaseProfile::random(stack.layer_count(), stack.cells_per_layer(), &mut rng);
                        let (method, cfg) = if key.method == MethodKind::SimGa {
                            (Method::GradientAscent, self.config.optimizer.gradient_ascent(k))
                        } else {
                            (Method::QuasiNewton, self.config.optimizer.quasi_newton(k))
                        };
                        let (phases, trace) = optimize_phases(&problem, method, &cfg, Some(init))?;
                        (phases, trace.iterations())
                    }
                };
                let g = compose_sim(stack, &phases, noise.transmission_efficiency)?;
                Ok((sinr(&g.g, &ch.h, &noise, factor)?, iterations))
            }
            MethodKind::DpaEqualAperture | MethodKind::DpaEqualRf => {
                let receiver = if key.method == MethodKind::DpaEqualAperture {
                    Receiver::DpaEqualAperture
                } else {
                    Receiver::DpaEqualRf
                };
                let ch = self.channel(receiver, key.placement, key.realization)?;
                let g = if k == 1 { dpa_mrc(&ch.h) } else { dpa_zf(&ch.h)? };
                let setup = self.setup(receiver);
                Ok((sinr_digital(&g.g, &ch.h, &self.noise(receiver, key.p_t_dbm), &setup.correlation.factor)?, 0))
            }
        }
    }

    fn run_trial(&self, key: &TrialKey) -> Result<TrialResult> {
        let start = Instant::now();
        let (report, iterations) = self.evaluate(key)?;
        if !report.sum_rate.is_finite() {
            return Err(Error::Numerical(format!("non-finite sum-rate for {}", key.method)));
        }
        Ok(TrialResult {
            method: key.method,
            layers: key.layers,
            p_t_dbm_per_m2: key.p_t_dbm,
            placement: key.placement,
            realization: key.realization,
            gamma: report.gamma,
            sum_rate: report.sum_rate,
            iterations,
            seconds: self.config.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        })
    }

    fn keys(&self) -> Vec<TrialKey> {
        let mut methods = self.config.methods.clone();
        methods.sort();
        methods.dedup();
        let mut keys = Vec::new();
        for &method in &methods {
            // DPA baselines do not depend on the layer count; evaluate them
            // once per swept L anyway so that every aggregate row exists.
            for &layers in &self.config.layers {
                for &p_t_dbm in &self.config.p_t_dbm_per_m2 {
                    for &(placement, realization) in &self.draws {
                        keys.push(TrialKey { method, layers, p_t_dbm, placement, realization });
                    }
                }
            }
        }
        keys
    }

    /// Runs every trial, in parallel, and returns them in canonical order.
    pub fn run(&self) -> Result<CampaignResults> {
        let keys = self.keys();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?;
        let mut trials: Vec<TrialResult> = pool.install(|| keys.par_iter().map(|k| self.run_trial(k)).collect::<Result<_>>())?;
        trials.sort_by(|a, b| {
            (a.method, a.layers)
                .cmp(&(b.method, b.layers))
                .then(a.p_t_dbm_per_m2.total_cmp(&b.p_t_dbm_per_m2))
                .then((a.placement, a.realization).cmp(&(b.placement, b.realization)))
        });
        let aggregates = aggregate(&trials, self.constants.bandwidth);
        Ok(CampaignResults { trials, aggregates })
    }
}

/// Mean, spread and 95% interval of the sum-rate per (method, L, P_T).
pub fn aggregate(trials: &[TrialResult], bandwidth: f64) -> Vec<Aggregate> {
    let mut groups: Vec<Aggregate> = Vec::new();
    let mut rates: Vec<Vec<(f64, usize)>> = Vec::new();
    for t in trials {
        let pos = groups.iter().position(|g| {
            g.method == t.method && g.layers == t.layers && g.p_t_dbm_per_m2.to_bits() == t.p_t_dbm_per_m2.to_bits()
        });
        let idx = pos.unwrap_or_else(|| {
            groups.push(Aggregate {
                method: t.method,
                layers: t.layers,
                p_t_dbm_per_m2: t.p_t_dbm_per_m2,
                count: 0,
                mean_sum_rate: 0.0,
                std_sum_rate: 0.0,
                ci95: 0.0,
                mean_throughput_bps: 0.0,
                mean_iterations: 0.0,
            });
            rates.push(Vec::new());
            groups.len() - 1
        });
        rates[idx].push((t.sum_rate, t.iterations));
    }
    for (g, r) in groups.iter_mut().zip(&rates) {
        let n = r.len() as f64;
        let mean = r.iter().map(|v| v.0).sum::<f64>() / n;
        let var = if r.len() > 1 { r.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        g.count = r.len();
        g.mean_sum_rate = mean;
        g.std_sum_rate = var.sqrt();
        g.ci95 = 1.96 * var.sqrt() / n.sqrt();
        g.mean_throughput_bps = mean * bandwidth;
        g.mean_iterations = r.iter().map(|v| v.1 as f64).sum::<f64>() / n;
    }
    groups
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<CampaignResults> {
    Scenario::new(config)?.run()
}

/// Layer sweep at the first configured transmit power.
pub fn sweep_layers(config: &ExperimentConfig) -> Result<CampaignResults> {
    config.validate()?;
    let mut c = config.clone();
    c.p_t_dbm_per_m2.truncate(1);
    run_experiment(&c)
}

/// Power sweep at the first configured layer count.
pub fn sweep_power(config: &ExperimentConfig) -> Result<CampaignResults> {
    config.validate()?;
    let mut c = config.clone();
    c.layers.truncate(1);
    run_experiment(&c)
}
