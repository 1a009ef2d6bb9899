use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;

use super::Objective;
use crate::channel::NoiseBudget;
use crate::combiner::{compose_sim, insertion_loss_factor, scale_columns, unit_phasors, PhaseProfile};
use crate::geometry::PropagationStack;
use crate::metrics::sinr;
use crate::{CMatrix, Error, Result};

/// Everything needed to evaluate the SIM sum-rate as a function of the phases.
#[derive(Debug, Clone, Copy)]
pub struct SumRateProblem<'a> {
    pub stack: &'a PropagationStack,
    pub h: &'a CMatrix,
    pub noise: &'a NoiseBudget,
    /// Antenna-correlation factor `F`, `Sigma_rx = F F^H`.
    pub factor: &'a CMatrix,
}

impl<'a> SumRateProblem<'a> {
    pub fn new(stack: &'a PropagationStack, h: &'a CMatrix, noise: &'a NoiseBudget, factor: &'a CMatrix) -> Result<Self> {
        let n = stack.cells_per_layer();
        if h.nrows() != n {
            return Err(Error::DimensionMismatch { what: "channel rows", expected: n, found: h.nrows() });
        }
        if stack.element_count() != h.ncols() {
            return Err(Error::DimensionMismatch {
                what: "DPA elements (one RF chain per user)",
                expected: h.ncols(),
                found: stack.element_count(),
            });
        }
        if factor.shape() != (n, n) {
            return Err(Error::DimensionMismatch { what: "correlation factor size", expected: n, found: factor.nrows() });
        }
        Ok(Self { stack, h, noise, factor })
    }

    pub fn layers(&self) -> usize {
        self.stack.layer_count()
    }

    pub fn cells(&self) -> usize {
        self.stack.cells_per_layer()
    }

    pub fn sum_rate(&self, phases: &PhaseProfile) -> Result<f64> {
        let g = compose_sim(self.stack, phases, self.noise.transmission_efficiency)?;
        Ok(sinr(&g.g, self.h, self.noise, self.factor)?.sum_rate)
    }

    fn profile(&self, x: &[f64]) -> Result<PhaseProfile> {
        PhaseProfile::new(self.layers(), self.cells(), x.to_vec())
    }
}

impl Objective for SumRateProblem<'_> {
    fn dim(&self) -> usize {
        self.layers() * self.cells()
    }

    fn block_len(&self) -> usize {
        self.cells()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.sum_rate(&self.profile(x)?)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        analytic_gradient(self.stack, &self.profile(x)?, self.h, self.noise, self.factor)
    }
}

/// Exact derivative of the sum-rate with respect to every phase, returned
/// layer-major (`L * N` entries).
///
/// Writing `g_k = c * A_l[k] W^l B_l` with the prefix `A_l = P^1 W^1 ... P^l`
/// (row `k`) and the suffix `B_l = P^{l+1} W^{l+1} ... P^L W^L`, every
/// bilinear form `g_k v` has derivative `c * A_l[k, n] * j e^{j theta} *
/// (B_l v)[n]` with respect to `theta^l_n`. The suffix is applied to the `K`
/// channel columns and to the `K` vectors `Sigma g_k^H` (which carry the
/// colored-noise term), so each layer costs `O(N^2 K)`.
pub fn analytic_gradient(
    stack: &PropagationStack,
    phases: &PhaseProfile,
    h: &CMatrix,
    noise: &NoiseBudget,
    factor: &CMatrix,
) -> Result<Vec<f64>> {
    let problem = SumRateProblem::new(stack, h, noise, factor)?;
    let layers = problem.layers();
    let n = problem.cells();
    if phases.layers() != layers || phases.cells() != n {
        return Err(Error::DimensionMismatch { what: "phase profile size", expected: layers * n, found: phases.as_slice().len() });
    }
    let k = h.ncols();
    let c = insertion_loss_factor(noise.transmission_efficiency, layers);
    let p_t = noise.transmit_flux;
    let phasors: Vec<Vec<Complex64>> = (1..=layers).map(|l| unit_phasors(phases.layer(l))).collect();

    // prefixes[l-1] = P^1 W^1 ... W^{l-1} P^l  (K x N)
    let mut prefixes = Vec::with_capacity(layers);
    let mut acc = stack.p(1).clone();
    for l in 1..=layers {
        prefixes.push(acc.clone());
        scale_columns(&mut acc, &phasors[l - 1]);
        if l < layers {
            acc = &acc * stack.p(l + 1);
        }
    }
    let g = acc * Complex64::from(c);

    let a = &g * h; // K x K
    let q = &g * factor; // K x N
    let colored = factor * q.adjoint(); // N x K, column k = Sigma g_k^H

    let mut signal = vec![0.0; k];
    let mut denom = vec![0.0; k];
    for user in 0..k {
        signal[user] = p_t * a[(user, user)].norm_sqr();
        let interference: f64 = (0..k).filter(|j| *j != user).map(|j| p_t * a[(user, j)].norm_sqr()).sum();
        let noise_term = noise.antenna_noise * q.row(user).iter().map(Complex64::norm_sqr).sum::<f64>();
        denom[user] = interference + noise_term + noise.rf_noise;
    }

    // Suffix operand [H | Sigma g^H] (N x 2K), propagated inward one layer at a time.
    let mut suffix = CMatrix::zeros(n, 2 * k);
    suffix.columns_mut(0, k).copy_from(h);
    suffix.columns_mut(k, k).copy_from(&colored);

    let mut grad = vec![0.0; layers * n];
    for l in (1..=layers).rev() {
        let prefix = &prefixes[l - 1];
        let out = &mut grad[(l - 1) * n..l * n];
        for user in 0..k {
            let z = denom[user];
            let s = signal[user];
            if s == 0.0 {
                // a_kk = 0 zeroes both terms of the quotient rule.
                continue;
            }
            let gamma = s / z;
            let weight = 1.0 / (LN_2 * (1.0 + gamma) * z * z);
            // D[n] = Z P conj(a_kk) B[n,k] - S (sum_{j!=k} P conj(a_kj) B[n,j] + s2_ant B[n,K+k])
            let mut coeffs = DVector::<Complex64>::zeros(2 * k);
            for j in 0..k {
                coeffs[j] = if j == user { z * p_t * a[(user, j)].conj() } else { -s * p_t * a[(user, j)].conj() };
            }
            coeffs[k + user] = Complex64::from(-s * noise.antenna_noise);
            let d = &suffix * coeffs;
            for (i, o) in out.iter_mut().enumerate() {
                let term = prefix[(user, i)] * Complex64::i() * phasors[l - 1][i] * d[i] * c;
                *o += weight * 2.0 * term.re;
            }
        }
        if l > 1 {
            let mut scaled = suffix.clone();
            for (mut row, w) in scaled.row_iter_mut().zip(&phasors[l - 1]) {
                row *= *w;
            }
            suffix = stack.p(l) * scaled;
        }
    }
    if let Some(v) = grad.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("gradient entry {v}")));
    }
    Ok(grad)
}

/// Divides each block (layer) by its largest absolute entry. All-zero
/// blocks are left unchanged.
pub fn normalize_gradient(grad: &mut [f64], block_len: usize) {
    for block in grad.chunks_mut(block_len.max(1)) {
        let rho = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rho > 0.0 {
            block.iter_mut().for_each(|v| *v /= rho);
        }
    }
}
