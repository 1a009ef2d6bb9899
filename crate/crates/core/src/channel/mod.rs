//! Correlated Rayleigh channels, path loss and the receiver noise budget.

mod io;

pub use io::{export_channels, import_channels, read_channels, write_channels, CHANNEL_MAGIC, CHANNEL_VERSION};

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Point, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Smallest eigenvalue kept when factoring a correlation matrix.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Normalised sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Receive-side spatial correlation and its square-root factor.
///
/// The factor is lower triangular when the Cholesky decomposition of the
/// regularised matrix succeeds, and satisfies `sigma ~= factor * factor^H`.
#[derive(Debug, Clone)]
pub struct CorrelationModel {
    pub sigma: DMatrix<f64>,
    pub factor: CMatrix,
}

impl CorrelationModel {
    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Identity correlation, i.e. spatially white fading.
    pub fn identity(n: usize) -> Self {
        Self {
            sigma: DMatrix::identity(n, n),
            factor: CMatrix::identity(n, n),
        }
    }

    /// Factors an arbitrary symmetric correlation matrix.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::DimensionMismatch {
                what: "correlation matrix columns",
                expected: sigma.nrows(),
                found: sigma.ncols(),
            });
        }
        let factor = square_root_factor(&sigma);
        Ok(Self { sigma, factor })
    }

    /// `factor * factor^H`, for checking the reconstruction.
    pub fn reconstruct(&self) -> CMatrix {
        &self.factor * self.factor.adjoint()
    }
}

fn square_root_factor(sigma: &DMatrix<f64>) -> CMatrix {
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|v| v.max(EIGENVALUE_FLOOR));
    let v = &eig.eigenvectors;
    let regularized = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    let regularized = (&regularized + regularized.transpose()) * 0.5;
    let real = match Cholesky::new(regularized) {
        Some(c) => c.l(),
        None => v * DMatrix::from_diagonal(&clamped.map(f64::sqrt)),
    };
    real.map(|x| Complex64::new(x, 0.0))
}

/// Sinc correlation for scatterers spread uniformly over the sphere.
pub fn build_correlation(positions: &[Point], wavelength: f64) -> Result<CorrelationModel> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::InvalidGeometry("correlation needs at least one position".into()));
    }
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            sinc(2.0 * (positions[i] - positions[j]).norm() / wavelength)
        }
    });
    CorrelationModel::from_matrix(sigma)
}

/// Received power and noise per receiving element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Antenna-captured noise power per element, W.
    pub antenna_noise: f64,
    /// Input-referred RF-chain noise power per chain, W.
    pub rf_noise: f64,
    /// User transmit power flux density at the aperture, W/m^2.
    pub transmit_flux: f64,
    /// Effective capture area per receiving element, m^2.
    pub effective_area: f64,
    /// Per-layer power transmission efficiency of the metasurfaces.
    pub transmission_efficiency: f64,
    /// Radiation efficiency of the receiving element, applied to signal power.
    pub element_efficiency: f64,
}

impl NoiseBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("antenna_noise", self.antenna_noise),
            ("rf_noise", self.rf_noise),
            ("transmit_flux", self.transmit_flux),
            ("effective_area", self.effective_area),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("transmission_efficiency", self.transmission_efficiency),
            ("element_efficiency", self.element_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// One channel draw: `N x K` matrix plus the per-user path gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnsemble {
    pub h: CMatrix,
    pub beta: Vec<f64>,
    pub user_positions: Vec<Point>,
    pub placement_id: u64,
    pub realization_id: u64,
}

impl ChannelEnsemble {
    pub fn users(&self) -> usize {
        self.h.ncols()
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }
}

/// Draws one standard complex normal `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Kronecker Rayleigh draw `H = F * Hw * diag(sqrt(beta_k * A_eff * eta))`.
///
/// Column `k` has covariance `beta_k * A_eff * eta * Sigma_rx`.
pub fn build_channel<R: Rng + ?Sized>(
    correlation: &CorrelationModel,
    beta: &[f64],
    noise: &NoiseBudget,
    rng: &mut R,
) -> Result<ChannelEnsemble> {
    let n = correlation.dim();
    if correlation.factor.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "correlation factor",
            expected: n,
            found: correlation.factor.nrows(),
        });
    }
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::config("beta", format!("path gains must be positive, got {b}")));
    }
    let k = beta.len();
    let white = CMatrix::from_fn(n, k, |_, _| complex_normal(rng));
    let mut h = &correlation.factor * white;
    let power = noise.effective_area * noise.element_efficiency;
    for (mut col, b) in h.column_iter_mut().zip(beta) {
        col *= Complex64::from((b * power).sqrt());
    }
    Ok(ChannelEnsemble {
        h,
        beta: beta.to_vec(),
        user_positions: Vec::new(),
        placement_id: 0,
        realization_id: 0,
    })
}

/// Draws antenna noise `F * w`, `w ~ CN(0, sigma2 I)`.
pub fn draw_antenna_noise<R: Rng + ?Sized>(
    correlation: &CorrelationModel,
    sigma2: f64,
    rng: &mut R,
) -> DVector<Complex64> {
    let w = DVector::from_fn(correlation.dim(), |_, _| complex_normal(rng) * sigma2.sqrt());
    &correlation.factor * w
}

/// Log-distance path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub exponent: f64,
    /// Loss at 1 m, dB.
    pub reference_loss_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            exponent: 3.67,
            reference_loss_db: 52.7,
        }
    }
}

/// Power gain `beta` at `distance` meters.
pub fn path_loss(distance: f64, model: &PathLossModel) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::config("distance", format!("must be positive, got {distance}")));
    }
    let loss_db = model.reference_loss_db + 10.0 * model.exponent * distance.log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Noise power captured by an aperture of `effective_area` looking at a
/// `2 pi` steradian noise source at temperature `temperature`.
pub fn antenna_noise_power(effective_area: f64, wavelength: f64, bandwidth: f64, temperature: f64) -> f64 {
    BOLTZMANN * temperature * bandwidth * (effective_area / (wavelength * wavelength)) * 2.0 * PI
}

/// Input-referred RF-chain noise `k T B (F - 1)`.
pub fn rf_noise_power(bandwidth: f64, temperature: f64, noise_figure_db: f64) -> f64 {
    let f = 10f64.powf(noise_figure_db / 10.0);
    BOLTZMANN * temperature * bandwidth * (f - 1.0)
}

/// Converts dBm/m^2 to W/m^2.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
