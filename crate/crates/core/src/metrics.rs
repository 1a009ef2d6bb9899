//! Per-user SINR and achievable sum-rate.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::NoiseBudget;
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub gamma: Vec<f64>,
    /// Sum-rate, bits/s/Hz.
    pub sum_rate: f64,
    pub per_user_rate: Vec<f64>,
    pub signal_power: Vec<f64>,
    pub interference_power: Vec<f64>,
    pub colored_noise_power: Vec<f64>,
    pub rf_noise_power: Vec<f64>,
}

impl RateReport {
    pub fn users(&self) -> usize {
        self.gamma.len()
    }
}

pub fn rate_from_sinr(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

pub fn sum_rate_from_sinr(gamma: &[f64]) -> f64 {
    gamma.iter().map(|g| rate_from_sinr(*g)).sum()
}

pub fn sum_rate(report: &RateReport) -> f64 {
    report.per_user_rate.iter().sum()
}

/// Evaluates the uplink SINR of every user for a wave-domain combiner `g`
/// (`K x N`), channel `h` (`N x K`) and antenna-correlation factor `factor`
/// (`Sigma = factor * factor^H`).
///
/// User `k` is decoded on row `k` of `g`, after which a single RF chain adds
/// its noise:
///
/// ```text
/// gamma_k = P_T |g_k h_k|^2
///         / ( sum_{j != k} P_T |g_k h_j|^2 + s2_ant ||g_k F||^2 + s2_RF )
/// ```
pub fn sinr(g: &CMatrix, h: &CMatrix, noise: &NoiseBudget, factor: &CMatrix) -> Result<RateReport> {
    evaluate(g, h, noise, factor, false)
}

/// SINR for a digital array: every element has its own RF chain and the
/// combiner acts on the digitised samples, so the RF noise is shaped by the
/// combiner like the antenna noise, `s2_RF ||g_k||^2`. The result is then
/// invariant to a per-row rescaling of `g`.
pub fn sinr_digital(g: &CMatrix, h: &CMatrix, noise: &NoiseBudget, factor: &CMatrix) -> Result<RateReport> {
    evaluate(g, h, noise, factor, true)
}

fn evaluate(g: &CMatrix, h: &CMatrix, noise: &NoiseBudget, factor: &CMatrix, per_element_chains: bool) -> Result<RateReport> {
    let k = h.ncols();
    let n = h.nrows();
    if g.nrows() != k {
        return Err(Error::DimensionMismatch { what: "combiner rows (one per user)", expected: k, found: g.nrows() });
    }
    if g.ncols() != n {
        return Err(Error::DimensionMismatch { what: "combiner columns", expected: n, found: g.ncols() });
    }
    if factor.shape() != (n, n) {
        return Err(Error::DimensionMismatch { what: "correlation factor size", expected: n, found: factor.nrows() });
    }
    let gh = g * h;
    let gf = g * factor;
    let p = noise.transmit_flux;
    let mut report = RateReport {
        gamma: Vec::with_capacity(k),
        sum_rate: 0.0,
        per_user_rate: Vec::with_capacity(k),
        signal_power: Vec::with_capacity(k),
        interference_power: Vec::with_capacity(k),
        colored_noise_power: Vec::with_capacity(k),
        rf_noise_power: Vec::with_capacity(k),
    };
    for user in 0..k {
        let row = gh.row(user);
        let signal = p * row[user].norm_sqr();
        let interference: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != user)
            .map(|(_, z)| p * z.norm_sqr())
            .sum();
        let colored = noise.antenna_noise * gf.row(user).iter().map(Complex64::norm_sqr).sum::<f64>();
        let rf = if per_element_chains {
            noise.rf_noise * g.row(user).iter().map(Complex64::norm_sqr).sum::<f64>()
        } else {
            noise.rf_noise
        };
        let gamma = signal / (interference + colored + rf);
        if !gamma.is_finite() {
            return Err(Error::Numerical(format!("SINR of user {user} is {gamma}")));
        }
        report.signal_power.push(signal);
        report.interference_power.push(interference);
        report.colored_noise_power.push(colored);
        report.rf_noise_power.push(rf);
        report.gamma.push(gamma);
        report.per_user_rate.push(rate_from_sinr(gamma));
    }
    report.sum_rate = sum_rate(&report);
    Ok(report)
}
