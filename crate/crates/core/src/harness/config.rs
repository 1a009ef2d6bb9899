//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::PathLossModel;
use crate::geometry::{grid_dimension, CouplingModel, DipoleAxis, PhysicalConstants};
use crate::optim::OptimizerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    SimGa,
    SimQn,
    SimMf,
    DpaEqualAperture,
    DpaEqualRf,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::SimGa => "sim_ga",
            MethodKind::SimQn => "sim_qn",
            MethodKind::SimMf => "sim_mf",
            MethodKind::DpaEqualAperture => "dpa_equal_aperture",
            MethodKind::DpaEqualRf => "dpa_equal_rf",
        }
    }

    pub fn is_sim(self) -> bool {
        matches!(self, MethodKind::SimGa | MethodKind::SimQn | MethodKind::SimMf)
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub environment_temperature_k: f64,
    pub bs_temperature_k: f64,
    pub noise_figure_db: f64,
    /// RF-chain gain. It cancels in the SINR and is kept for reporting only.
    pub rf_gain_db: f64,
    /// Per-layer power transmission efficiency.
    pub transmission_efficiency: f64,
    pub patch_efficiency: f64,
    pub patch_effective_area_m2: f64,
    /// Unit-cell effective area; defaults to the physical cell area.
    pub cell_effective_area_m2: Option<f64>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 3e9,
            bandwidth_hz: 20e6,
            environment_temperature_k: 290.0,
            bs_temperature_k: 290.0,
            noise_figure_db: 18.8,
            rf_gain_db: 12.5,
            transmission_efficiency: 0.7,
            patch_efficiency: 0.9,
            patch_effective_area_m2: 0.0026,
            cell_effective_area_m2: None,
        }
    }
}

/// Lengths are in free-space wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub aperture_wavelengths: f64,
    pub cell_pitch_wavelengths: f64,
    pub thickness_wavelengths: f64,
    pub dipole_axis: DipoleAxis,
    pub coupling: CouplingModel,
    /// Rescale propagation matrices with spectral norm above one.
    pub enforce_passivity: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            aperture_wavelengths: 4.0,
            cell_pitch_wavelengths: 0.25,
            thickness_wavelengths: 5.0,
            dipole_axis: DipoleAxis::X,
            coupling: CouplingModel::CellAperture,
            enforce_passivity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    /// User height relative to the aperture center.
    pub height_offset_m: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { min_distance_m: 20.0, max_distance_m: 200.0, height_offset_m: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub ga_max_iterations: usize,
    pub qn_max_iterations: usize,
    /// Line-search initial step; defaults to 1.8 for one user, 2.2 otherwise.
    pub initial_step: Option<f64>,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub min_step: f64,
    pub rel_improvement_tol: f64,
    pub patience: usize,
    pub mirrored_probe: bool,
    pub qn_memory: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let ga = OptimizerConfig::gradient_ascent(1);
        Self {
            ga_max_iterations: ga.max_iterations,
            qn_max_iterations: OptimizerConfig::quasi_newton(1).max_iterations,
            initial_step: None,
            backtrack_factor: ga.backtrack_factor,
            armijo_c: ga.armijo_c,
            min_step: ga.min_step,
            rel_improvement_tol: ga.rel_improvement_tol,
            patience: ga.patience,
            mirrored_probe: ga.mirrored_probe,
            qn_memory: ga.memory,
        }
    }
}

impl OptimizerSettings {
    fn apply(&self, mut base: OptimizerConfig, max_iterations: usize) -> OptimizerConfig {
        base.max_iterations = max_iterations;
        if let Some(step) = self.initial_step {
            base.initial_step = step;
        }
        base.backtrack_factor = self.backtrack_factor;
        base.armijo_c = self.armijo_c;
        base.min_step = self.min_step;
        base.rel_improvement_tol = self.rel_improvement_tol;
        base.patience = self.patience;
        base.memory = self.qn_memory;
        base
    }

    pub fn gradient_ascent(&self, users: usize) -> OptimizerConfig {
        let mut cfg = self.apply(OptimizerConfig::gradient_ascent(users), self.ga_max_iterations);
        cfg.mirrored_probe = self.mirrored_probe;
        cfg
    }

    pub fn quasi_newton(&self, users: usize) -> OptimizerConfig {
        self.apply(OptimizerConfig::quasi_newton(users), self.qn_max_iterations)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    #[default]
    GenerateRayleigh,
    /// SIM channels from a channel file. DPA baselines need their own files
    /// because their element count differs.
    Import {
        path: PathBuf,
        #[serde(default)]
        dpa_equal_aperture_path: Option<PathBuf>,
        #[serde(default)]
        dpa_equal_rf_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    pub instances: usize,
    pub max_layers: usize,
    pub max_cells: usize,
    pub max_users: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { instances: 20, max_layers: 4, max_cells: 16, max_users: 3, step: 1e-6, tolerance: 1e-5, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub users: usize,
    pub methods: Vec<MethodKind>,
    pub p_t_dbm_per_m2: Vec<f64>,
    pub layers: Vec<usize>,
    #[serde(default = "default_placements")]
    pub placements: usize,
    #[serde(default = "default_realizations")]
    pub realizations_per_placement: usize,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// Write per-trial wall time to the results. Off by default so that
    /// repeated runs produce identical files.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub channel: ChannelSource,
    #[serde(default)]
    pub grad_check: GradCheckConfig,
}

fn default_placements() -> usize {
    10
}

fn default_realizations() -> usize {
    100
}

impl ExperimentConfig {
    /// A minimal valid configuration, mostly for tests and examples.
    pub fn new(users: usize, methods: Vec<MethodKind>, p_t_dbm_per_m2: Vec<f64>, layers: Vec<usize>) -> Self {
        Self {
            master_seed: 0,
            users,
            methods,
            p_t_dbm_per_m2,
            layers,
            placements: default_placements(),
            realizations_per_placement: default_realizations(),
            workers: 0,
            record_wall_time: false,
            physics: PhysicsConfig::default(),
            geometry: GeometryConfig::default(),
            path_loss: PathLossModel::default(),
            placement: PlacementConfig::default(),
            optimizer: OptimizerSettings::default(),
            channel: ChannelSource::default(),
            grad_check: GradCheckConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "<root>".into());
            Error::config(path, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        PhysicalConstants::new(self.physics.carrier_frequency_hz, self.physics.bandwidth_hz)
            .map_err(|e| Error::config("physics", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::config("users", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "method list is empty"));
        }
        if self.p_t_dbm_per_m2.is_empty() {
            return Err(Error::config("p_t_dbm_per_m2", "power sweep is empty"));
        }
        if let Some((i, v)) = self.p_t_dbm_per_m2.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::config(format!("p_t_dbm_per_m2[{i}]"), format!("not finite: {v}")));
        }
        if self.layers.is_empty() {
            return Err(Error::config("layers", "layer sweep is empty"));
        }
        if let Some(i) = self.layers.iter().position(|l| *l == 0) {
            return Err(Error::config(format!("layers[{i}]"), "layer count must be at least 1"));
        }
        if self.placements == 0 {
            return Err(Error::config("placements", "must be at least 1"));
        }
        if self.realizations_per_placement == 0 {
            return Err(Error::config("realizations_per_placement", "must be at least 1"));
        }

        let p = &self.physics;
        for (name, v) in [
            ("physics.carrier_frequency_hz", p.carrier_frequency_hz),
            ("physics.bandwidth_hz", p.bandwidth_hz),
            ("physics.environment_temperature_k", p.environment_temperature_k),
            ("physics.bs_temperature_k", p.bs_temperature_k),
            ("physics.patch_effective_area_m2", p.patch_effective_area_m2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(p.noise_figure_db > 0.0 && p.noise_figure_db.is_finite()) {
            return Err(Error::config("physics.noise_figure_db", "must be positive (a noiseless RF chain is not supported)"));
        }
        for (name, v) in [
            ("physics.transmission_efficiency", p.transmission_efficiency),
            ("physics.patch_efficiency", p.patch_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        if let Some(a) = p.cell_effective_area_m2 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("physics.cell_effective_area_m2", format!("must be positive, got {a}")));
            }
        }

        let g = &self.geometry;
        for (name, v) in [
            ("geometry.aperture_wavelengths", g.aperture_wavelengths),
            ("geometry.cell_pitch_wavelengths", g.cell_pitch_wavelengths),
            ("geometry.thickness_wavelengths", g.thickness_wavelengths),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        grid_dimension(g.aperture_wavelengths, g.cell_pitch_wavelengths)
            .map_err(|e| Error::config("geometry.cell_pitch_wavelengths", e.to_string()))?;
        if (self.users as f64 - 1.0) * 0.5 > g.aperture_wavelengths {
            return Err(Error::config("users", "one half-wavelength DPA element per user does not fit in the aperture"));
        }

        let pl = &self.placement;
        if !(pl.min_distance_m > 0.0 && pl.max_distance_m >= pl.min_distance_m && pl.max_distance_m.is_finite()) {
            return Err(Error::config("placement", "need 0 < min_distance_m <= max_distance_m"));
        }
        if !(self.path_loss.exponent.is_finite() && self.path_loss.reference_loss_db.is_finite()) {
            return Err(Error::config("path_loss", "coefficients must be finite"));
        }

        self.optimizer
            .gradient_ascent(self.users)
            .validate()
            .map_err(|e| Error::config("optimizer", e.to_string()))?;

        if let ChannelSource::Import { dpa_equal_aperture_path, dpa_equal_rf_path, .. } = &self.channel {
            if self.methods.contains(&MethodKind::DpaEqualAperture) && dpa_equal_aperture_path.is_none() {
                return Err(Error::config(
                    "channel.dpa_equal_aperture_path",
                    "imported channels need a separate file for the equal-aperture DPA",
                ));
            }
            if self.methods.contains(&MethodKind::DpaEqualRf) && dpa_equal_rf_path.is_none() {
                return Err(Error::config(
                    "channel.dpa_equal_rf_path",
                    "imported channels need a separate file for the equal-RF-chain DPA",
                ));
            }
        }

        let gc = &self.grad_check;
        if gc.instances == 0 || gc.max_layers == 0 || gc.max_cells == 0 || gc.max_users == 0 {
            return Err(Error::config("grad_check", "sizes and instance count must be at least 1"));
        }
        if !(gc.step > 0.0 && gc.tolerance > 0.0) {
            return Err(Error::config("grad_check", "step and tolerance must be positive"));
        }
        Ok(())
    }
}
