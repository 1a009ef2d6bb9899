//! Wave-domain cascade and the baseline combiners.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::geometry::PropagationStack;
use crate::{CMatrix, Error, Result};

/// Largest condition number accepted for zero-forcing.
pub const ZF_MAX_CONDITION: f64 = 1e12;

/// One phase per unit-cell per layer, stored layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    layers: usize,
    cells: usize,
    values: Vec<f64>,
}

impl PhaseProfile {
    pub fn new(layers: usize, cells: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != layers * cells {
            return Err(Error::DimensionMismatch { what: "phase vector length", expected: layers * cells, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite phase {v}")));
        }
        Ok(Self { layers, cells, values })
    }

    pub fn zeros(layers: usize, cells: usize) -> Self {
        Self { layers, cells, values: vec![0.0; layers * cells] }
    }

    /// I.i.d. uniform phases on `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(layers: usize, cells: usize, rng: &mut R) -> Self {
        let values = (0..layers * cells).map(|_| rng.random_range(0.0..TAU)).collect();
        Self { layers, cells, values }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Phases of layer `l` (1-based).
    pub fn layer(&self, l: usize) -> &[f64] {
        &self.values[(l - 1) * self.cells..l * self.cells]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.values[(l - 1) * self.cells..l * self.cells]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Same profile with every phase mapped into `[0, 2 pi)`.
    pub fn wrapped(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| {
                let w = v.rem_euclid(TAU);
                if w >= TAU { 0.0 } else { w }
            })
            .collect();
        Self { values, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerKind {
    Sim,
    DpaMrc,
    DpaZf,
    SimMatchedFilter,
}

#[derive(Debug, Clone)]
pub struct CombinerMatrix {
    pub g: CMatrix,
    pub kind: CombinerKind,
}

/// `exp(j theta)` for each entry.
pub fn unit_phasors(theta: &[f64]) -> Vec<Complex64> {
    theta.iter().map(|t| Complex64::from_polar(1.0, *t)).collect()
}

/// Multiplies column `n` of `m` by `d[n]`, i.e. `m * diag(d)`.
pub(crate) fn scale_columns(m: &mut CMatrix, d: &[Complex64]) {
    for (mut col, s) in m.column_iter_mut().zip(d) {
        col *= *s;
    }
}

fn check_dims(stack: &PropagationStack, phases: &PhaseProfile) -> Result<()> {
    if phases.layers() != stack.layer_count() {
        return Err(Error::DimensionMismatch { what: "layer count", expected: stack.layer_count(), found: phases.layers() });
    }
    if phases.cells() != stack.cells_per_layer() {
        return Err(Error::DimensionMismatch { what: "cells per layer", expected: stack.cells_per_layer(), found: phases.cells() });
    }
    Ok(())
}

/// Insertion-loss amplitude factor `sqrt(T^L)`.
pub fn insertion_loss_factor(transmission_efficiency: f64, layers: usize) -> f64 {
    transmission_efficiency.powi(layers as i32).sqrt()
}

/// Lossless cascade `P^1 W^1 P^2 W^2 ... P^L W^L`.
pub fn cascade(stack: &PropagationStack, phases: &PhaseProfile) -> Result<CMatrix> {
    check_dims(stack, phases)?;
    let layers = stack.layer_count();
    let mut acc = stack.p(1).clone();
    for l in 1..=layers {
        scale_columns(&mut acc, &unit_phasors(phases.layer(l)));
        if l < layers {
            acc = &acc * stack.p(l + 1);
        }
    }
    Ok(acc)
}

/// The SIM combiner `G = sqrt(T^L) * W_SIM`.
pub fn compose_sim(stack: &PropagationStack, phases: &PhaseProfile, transmission_efficiency: f64) -> Result<CombinerMatrix> {
    let mut g = cascade(stack, phases)?;
    g *= Complex64::from(insertion_loss_factor(transmission_efficiency, stack.layer_count()));
    Ok(CombinerMatrix { g, kind: CombinerKind::Sim })
}

#[derive(Debug, Clone)]
pub struct MatchedFilter {
    pub phases: PhaseProfile,
    /// Cells whose arriving field or coupling vanished; their phase is 0.
    pub undefined_phases: usize,
}

/// Phase-alignment heuristic for one user.
///
/// Working from the user-facing layer inward, each cell cancels the phase of
/// the field arriving at it plus the phase of its coupling to the cell
/// directly behind it (the diagonal of the next propagation matrix). On the
/// innermost layer the coupling is to the DPA element serving `target_user`.
/// The phased field is then pushed one layer inward through the full
/// propagation matrix.
pub fn matched_filter_phases(stack: &PropagationStack, h: &CMatrix, target_user: usize) -> Result<MatchedFilter> {
    let n = stack.cells_per_layer();
    if h.nrows() != n {
        return Err(Error::DimensionMismatch { what: "channel rows", expected: n, found: h.nrows() });
    }
    if target_user >= h.ncols() {
        return Err(Error::DimensionMismatch { what: "target user index bound", expected: h.ncols(), found: target_user });
    }
    let layers = stack.layer_count();
    let element = target_user % stack.element_count();
    let mut phases = PhaseProfile::zeros(layers, n);
    let mut undefined = 0;
    let mut field: Vec<Complex64> = h.column(target_user).iter().copied().collect();
    for l in (1..=layers).rev() {
        let p = stack.p(l);
        let theta = phases.layer_mut(l);
        for (i, t) in theta.iter_mut().enumerate() {
            let coupling = if l == 1 { p[(element, i)] } else { p[(i, i)] };
            if field[i] == Complex64::new(0.0, 0.0) || coupling == Complex64::new(0.0, 0.0) {
                undefined += 1;
                *t = 0.0;
            } else {
                *t = -field[i].arg() - coupling.arg();
            }
        }
        if l > 1 {
            let phased: Vec<Complex64> = field.iter().zip(unit_phasors(theta)).map(|(e, w)| e * w).collect();
            let next = p * nalgebra::DVector::from_vec(phased);
            field = next.iter().copied().collect();
        }
    }
    Ok(MatchedFilter { phases: phases.wrapped(), undefined_phases: undefined })
}

/// Maximum-ratio combining, `G = H^H`.
pub fn dpa_mrc(h: &CMatrix) -> CombinerMatrix {
    CombinerMatrix { g: h.adjoint(), kind: CombinerKind::DpaMrc }
}

/// Spectral condition number from singular values.
pub fn condition_number(h: &CMatrix) -> f64 {
    let sv = h.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 { max / min } else { f64::INFINITY }
}

/// Zero-forcing `G = (H^H H)^{-1} H^H`, solved through a QR factorisation.
pub fn dpa_zf(h: &CMatrix) -> Result<CombinerMatrix> {
    let (m, k) = h.shape();
    if k > m {
        return Err(Error::RankDeficient { condition: f64::INFINITY });
    }
    let condition = condition_number(h);
    if condition.is_nan() || condition > ZF_MAX_CONDITION {
        return Err(Error::RankDeficient { condition });
    }
    let qr = h.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let g = r
        .solve_upper_triangular(&q.adjoint())
        .ok_or(Error::RankDeficient { condition })?;
    Ok(CombinerMatrix { g, kind: CombinerKind::DpaZf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| crate::channel::complex_normal(rng))
    }

    fn random_stack(m: usize, n: usize, layers: usize, rng: &mut ChaCha8Rng) -> PropagationStack {
        let mut ms = vec![random_matrix(m, n, rng)];
        for _ in 1..layers {
            ms.push(random_matrix(n, n, rng));
        }
        PropagationStack::from_matrices(ms).unwrap()
    }

    #[test]
    fn single_layer_zero_phase_is_p1() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_stack(2, 5, 1, &mut rng);
        let g = compose_sim(&s, &PhaseProfile::zeros(1, 5), 1.0).unwrap();
        assert_eq!(&g.g, s.p(1));
    }

    #[test]
    fn insertion_loss_value() {
        assert!((insertion_loss_factor(0.7, 5) - 0.409_963).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_stack(1, 4, 5, &mut rng);
        let ph = PhaseProfile::random(5, 4, &mut rng);
        let lossless = compose_sim(&s, &ph, 1.0).unwrap().g;
        let lossy = compose_sim(&s, &ph, 0.7).unwrap().g;
        assert!((lossy.norm() - 0.7f64.powi(5).sqrt() * lossless.norm()).abs() < 1e-12 * lossless.norm());
    }

    #[test]
    fn global_phase_on_outer_layer_is_a_phase_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_stack(2, 6, 3, &mut rng);
        let ph = PhaseProfile::random(3, 6, &mut rng);
        let mut shifted = ph.clone();
        shifted.layer_mut(3).iter_mut().for_each(|t| *t += 0.83);
        let a = compose_sim(&s, &ph, 0.7).unwrap().g;
        let b = compose_sim(&s, &shifted, 0.7).unwrap().g;
        let rot = Complex64::from_polar(1.0, 0.83);
        assert!((&a * rot - &b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_stack(1, 4, 2, &mut rng);
        assert!(compose_sim(&s, &PhaseProfile::zeros(3, 4), 1.0).is_err());
        assert!(compose_sim(&s, &PhaseProfile::zeros(2, 5), 1.0).is_err());
    }

    #[test]
    fn spectral_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = random_stack(2, 6, 3, &mut rng);
            let ph = PhaseProfile::random(3, 6, &mut rng);
            let g = compose_sim(&s, &ph, 0.7).unwrap().g;
            let bound: f64 = insertion_loss_factor(0.7, 3)
                * s.matrices().iter().map(|p| p.singular_values().max()).product::<f64>();
            assert!(g.singular_values().max() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn matched_filter_on_real_positive_problem_is_zero() {
        let n = 4;
        let p1 = CMatrix::from_element(1, n, Complex64::new(0.5, 0.0));
        let p2 = CMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { 1.0 } else { 0.2 }, 0.0));
        let s = PropagationStack::from_matrices(vec![p1, p2]).unwrap();
        let h = CMatrix::from_element(n, 1, Complex64::new(0.3, 0.0));
        let mf = matched_filter_phases(&s, &h, 0).unwrap();
        assert!(mf.phases.as_slice().iter().all(|t| *t == 0.0));
        assert_eq!(mf.undefined_phases, 0);
    }

    #[test]
    fn matched_filter_flags_zero_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_stack(1, 3, 1, &mut rng);
        let mut h = random_matrix(3, 1, &mut rng);
        h[(1, 0)] = Complex64::new(0.0, 0.0);
        let mf = matched_filter_phases(&s, &h, 0).unwrap();
        assert_eq!(mf.undefined_phases, 1);
        assert_eq!(mf.phases.layer(1)[1], 0.0);
        assert!(matched_filter_phases(&s, &h, 1).is_err());
    }

    #[test]
    fn zf_inverts_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_matrix(64, 2, &mut rng);
        let g = dpa_zf(&h).unwrap().g;
        let residual = (&g * &h - CMatrix::identity(2, 2)).norm();
        assert!(residual < 1e-10, "residual {residual:e}");
    }

    #[test]
    fn zf_with_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = random_matrix(6, 3, &mut rng).qr().q();
        let g = dpa_zf(&q).unwrap().g;
        assert!((&g * &q - CMatrix::identity(3, 3)).norm() < 1e-12);
        for row in g.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_rejects_rank_deficient() {
        let col = CMatrix::from_fn(4, 1, |i, _| Complex64::new(i as f64 + 1.0, 0.5));
        let h = CMatrix::from_fn(4, 2, |i, _| col[(i, 0)]);
        match dpa_zf(&h) {
            Err(Error::RankDeficient { condition }) => assert!(condition > ZF_MAX_CONDITION),
            other => panic!("unexpected {other:?}"),
        }
        assert!(dpa_zf(&CMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn wrapping_is_canonical() {
        let p = PhaseProfile::new(1, 3, vec![-0.1, 7.0, TAU]).unwrap().wrapped();
        assert!(p.as_slice().iter().all(|v| (0.0..TAU).contains(v)));
        assert!((p.as_slice()[0] - (TAU - 0.1)).abs() < 1e-15);
        assert!(PhaseProfile::new(1, 2, vec![f64::NAN, 0.0]).is_err());
    }
}
