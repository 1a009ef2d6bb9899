//! Physical layout of the SIM and the fixed inter-layer propagation matrices.
//!
//! Coordinates are in meters. The digital backplane (DPA) lies in the plane
//! `z = 0`, layer `l` (1-based) sits at `z = l * t_SIM / L`, and the outermost
//! layer `L` faces the users along `+z`. Every unit-cell and every DPA element
//! is modelled as a Hertzian dipole whose axis lies in the layer plane, so
//! that boresight carries the maximum of the `sin^2(theta)` pattern.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Point, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Squared-amplitude normalisation of the dipole coupling, `3*sqrt(2)/(8*pi)`.
pub const DIPOLE_NORMALIZATION: f64 = 3.0 * std::f64::consts::SQRT_2 / (8.0 * PI);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub carrier_frequency: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub bandwidth: f64,
}

impl PhysicalConstants {
    pub fn new(carrier_frequency: f64, bandwidth: f64) -> Result<Self> {
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Ok(Self {
            carrier_frequency,
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
            bandwidth,
        })
    }
}

/// In-plane orientation of every dipole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipoleAxis {
    #[default]
    X,
    Y,
}

impl DipoleAxis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            DipoleAxis::X => Vector3::x(),
            DipoleAxis::Y => Vector3::y(),
        }
    }
}

/// Placement of the DPA elements in the `z = 0` plane.
#[derive(Debug, Clone, PartialEq)]
pub enum DpaLayout {
    /// Elements along `x` at half-wavelength spacing, centered on the axis.
    LinearHalfWavelength,
    /// Row-major square-ish grid at half-wavelength pitch, centered.
    GridHalfWavelength,
    Explicit(Vec<Point>),
}

impl DpaLayout {
    fn name(&self) -> &'static str {
        match self {
            DpaLayout::LinearHalfWavelength => "linear_half_wavelength",
            DpaLayout::GridHalfWavelength => "grid_half_wavelength",
            DpaLayout::Explicit(_) => "explicit",
        }
    }
}

/// How a point-dipole power density is turned into a matrix coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// Entry is the dipole field amplitude itself, in 1/m.
    PointDensity,
    /// Entry is the amplitude times the square root of the receiving
    /// cell's area, i.e. the fraction of radiated power the cell intercepts.
    #[default]
    CellAperture,
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub aperture_side: f64,
    pub cell_pitch: f64,
    pub layer_count: usize,
    pub sim_thickness: f64,
    pub cells_per_side: usize,
    pub dipole_axis: DipoleAxis,
    pub dpa_element_positions: Vec<Point>,
    /// `layer_cell_positions[l - 1]` holds the cells of layer `l`.
    pub layer_cell_positions: Vec<Vec<Point>>,
}

impl Geometry {
    pub fn cells_per_layer(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn element_count(&self) -> usize {
        self.dpa_element_positions.len()
    }

    pub fn layer_spacing(&self) -> f64 {
        self.sim_thickness / self.layer_count as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_pitch * self.cell_pitch
    }

    /// Cells of the user-facing layer.
    pub fn outer_layer(&self) -> &[Point] {
        self.layer_cell_positions
            .last()
            .expect("geometry has at least one layer")
    }
}

/// Number of grid cells per side, if `aperture_side / cell_pitch` is integral.
pub fn grid_dimension(aperture_side: f64, cell_pitch: f64) -> Result<usize> {
    let ratio = aperture_side / cell_pitch;
    let rounded = ratio.round();
    if !ratio.is_finite() || rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::NonIntegerGrid { ratio });
    }
    Ok(rounded as usize)
}

fn centered_offsets(count: usize, pitch: f64) -> impl Iterator<Item = f64> {
    let half = (count as f64 - 1.0) / 2.0;
    (0..count).map(move |i| (i as f64 - half) * pitch)
}

/// Lays out a uniform square grid of `side * side` points in plane `z`.
pub fn square_grid(side: usize, pitch: f64, z: f64) -> Vec<Point> {
    let offsets: Vec<f64> = centered_offsets(side, pitch).collect();
    let mut out = Vec::with_capacity(side * side);
    for &y in &offsets {
        for &x in &offsets {
            out.push(Point::new(x, y, z));
        }
    }
    out
}

fn place_dpa(
    layout: &DpaLayout,
    count: usize,
    wavelength: f64,
    aperture_side: f64,
) -> Result<Vec<Point>> {
    let half = aperture_side / 2.0;
    let fits = |extent: f64| extent <= aperture_side * (1.0 + 1e-12);
    let overflow = || Error::LayoutOverflow {
        requested: count,
        layout: layout.name(),
        aperture: aperture_side,
    };
    let pitch = wavelength / 2.0;
    match layout {
        DpaLayout::LinearHalfWavelength => {
            if !fits((count as f64 - 1.0) * pitch) {
                return Err(overflow());
            }
            Ok(centered_offsets(count, pitch)
                .map(|x| Point::new(x, 0.0, 0.0))
                .collect())
        }
        DpaLayout::GridHalfWavelength => {
            let cols = (count as f64).sqrt().ceil() as usize;
            let rows = count.div_ceil(cols);
            if !fits((cols as f64 - 1.0) * pitch) || !fits((rows as f64 - 1.0) * pitch) {
                return Err(overflow());
            }
            let xs: Vec<f64> = centered_offsets(cols, pitch).collect();
            let ys: Vec<f64> = centered_offsets(rows, pitch).collect();
            Ok((0..count)
                .map(|i| Point::new(xs[i % cols], ys[i / cols], 0.0))
                .collect())
        }
        DpaLayout::Explicit(points) => {
            if points.len() != count {
                return Err(Error::DimensionMismatch {
                    what: "explicit DPA element list",
                    expected: count,
                    found: points.len(),
                });
            }
            let tol = 1e-12 * aperture_side;
            if points
                .iter()
                .any(|p| p.x.abs() > half + tol || p.y.abs() > half + tol)
            {
                return Err(overflow());
            }
            Ok(points.clone())
        }
    }
}

/// Builds the aperture grid, the `L` parallel layers and the DPA backplane.
#[allow(clippy::too_many_arguments)]
pub fn build_geometry(
    constants: &PhysicalConstants,
    aperture_side: f64,
    cell_pitch: f64,
    layer_count: usize,
    sim_thickness: f64,
    element_count: usize,
    dpa_layout: &DpaLayout,
    dipole_axis: DipoleAxis,
) -> Result<Geometry> {
    if !(aperture_side > 0.0 && cell_pitch > 0.0) {
        return Err(Error::InvalidGeometry(
            "aperture side and cell pitch must be positive".into(),
        ));
    }
    if layer_count == 0 {
        return Err(Error::InvalidGeometry("layer count must be at least 1".into()));
    }
    if element_count == 0 {
        return Err(Error::InvalidGeometry("DPA needs at least one element".into()));
    }
    if !(sim_thickness > 0.0 && sim_thickness.is_finite()) {
        return Err(Error::InvalidGeometry("SIM thickness must be positive".into()));
    }
    let cells_per_side = grid_dimension(aperture_side, cell_pitch)?;
    let spacing = sim_thickness / layer_count as f64;
    let layer_cell_positions = (1..=layer_count)
        .map(|l| square_grid(cells_per_side, cell_pitch, l as f64 * spacing))
        .collect();
    let dpa_element_positions =
        place_dpa(dpa_layout, element_count, constants.wavelength, aperture_side)?;
    Ok(Geometry {
        aperture_side,
        cell_pitch,
        layer_count,
        sim_thickness,
        cells_per_side,
        dipole_axis,
        dpa_element_positions,
        layer_cell_positions,
    })
}

fn separation(source: &Point, target: &Point) -> Result<(Vector3<f64>, f64)> {
    let d = target - source;
    let r = d.norm();
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::ZeroDistance);
    }
    Ok((d, r))
}

/// Field amplitude from a closed-form pattern value `sin^2(theta)` and range.
#[inline]
pub fn amplitude_from_pattern(sin2_theta: f64, r: f64) -> f64 {
    (DIPOLE_NORMALIZATION * sin2_theta / (r * r)).sqrt()
}

/// Phase of the propagating dipole field at electrical distance `k0 * r`,
/// reduced to `(-pi, pi]`.
pub fn phase_at_electrical_distance(kr: f64) -> f64 {
    let near = Complex64::new(1.0 - 1.0 / (kr * kr), -1.0 / kr);
    wrap_to_pi(FRAC_PI_2 - kr + near.arg())
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = angle.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    a
}

/// Dipole field amplitude from `source` to `target`, with `theta` measured
/// from the dipole axis.
pub fn propagation_amplitude(source: &Point, target: &Point, dipole_axis: &Vector3<f64>) -> Result<f64> {
    let (d, r) = separation(source, target)?;
    let axis = dipole_axis.normalize();
    let sin2 = (axis.cross(&d) / r).norm_squared().clamp(0.0, 1.0);
    Ok(amplitude_from_pattern(sin2, r))
}

pub fn propagation_phase(source: &Point, target: &Point, wavenumber: f64) -> Result<f64> {
    let (_, r) = separation(source, target)?;
    Ok(phase_at_electrical_distance(wavenumber * r))
}

/// The fixed matrices of the cascade.
///
/// `matrices[0]` is `P^1` (`M x N`, DPA element by layer-1 cell). For
/// `l >= 1`, `matrices[l]` is `P^{l+1}` (`N x N`), with rows indexed by the
/// cells of layer `l` and columns by the cells of layer `l + 1`.
#[derive(Debug, Clone)]
pub struct PropagationStack {
    matrices: Vec<CMatrix>,
}

impl PropagationStack {
    pub fn from_matrices(matrices: Vec<CMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidGeometry("empty propagation stack".into()))?;
        let n = first.ncols();
        for p in &matrices[1..] {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "inter-layer propagation matrix",
                    expected: n,
                    found: if p.nrows() != n { p.nrows() } else { p.ncols() },
                });
            }
        }
        Ok(Self { matrices })
    }

    pub fn layer_count(&self) -> usize {
        self.matrices.len()
    }

    pub fn cells_per_layer(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn element_count(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// `P^l` with the 1-based layer index used in the cascade.
    pub fn p(&self, l: usize) -> &CMatrix {
        &self.matrices[l - 1]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// Largest singular value of every propagation matrix.
    pub fn spectral_norms(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| m.singular_values().max()).collect()
    }

    /// Rescales every matrix whose spectral norm exceeds one down to unit
    /// norm, so that no layer can return more power than it receives.
    pub fn into_passive(mut self) -> Self {
        for m in &mut self.matrices {
            let norm = m.singular_values().max();
            if norm > 1.0 {
                *m /= Complex64::from(norm);
            }
        }
        self
    }
}

fn coupling_matrix(
    sources: &[Point],
    targets: &[Point],
    axis: &Vector3<f64>,
    wavenumber: f64,
    scale: f64,
) -> Result<CMatrix> {
    // rows: targets, columns: sources
    let mut m = CMatrix::zeros(targets.len(), sources.len());
    for (j, s) in sources.iter().enumerate() {
        for (i, t) in targets.iter().enumerate() {
            let amp = propagation_amplitude(s, t, axis)? * scale;
            let phase = propagation_phase(s, t, wavenumber)?;
            m[(i, j)] = Complex64::from_polar(amp, phase);
        }
    }
    Ok(m)
}

/// Builds `P^1 ... P^L` from the dipole model.
///
/// `P^1` is evaluated from the DPA elements toward the layer-1 cells and used
/// by reciprocity for the uplink direction. Inter-layer couplings run from
/// the cells of layer `l + 1` to those of layer `l`.
pub fn build_propagation_stack(
    geometry: &Geometry,
    constants: &PhysicalConstants,
    coupling: CouplingModel,
) -> Result<PropagationStack> {
    let axis = geometry.dipole_axis.unit();
    let scale = match coupling {
        CouplingModel::PointDensity => 1.0,
        CouplingModel::CellAperture => geometry.cell_pitch,
    };
    let k0 = constants.wavenumber;
    let layers = &geometry.layer_cell_positions;
    let mut matrices = Vec::with_capacity(geometry.layer_count);
    let first = coupling_matrix(&geometry.dpa_element_positions, &layers[0], &axis, k0, scale)?;
    matrices.push(first.transpose());
    for l in 1..geometry.layer_count {
        matrices.push(coupling_matrix(&layers[l], &layers[l - 1], &axis, k0, scale)?);
    }
    PropagationStack::from_matrices(matrices)
}
