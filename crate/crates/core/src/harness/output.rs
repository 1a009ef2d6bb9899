//! Result files: per-user trial CSV, aggregate CSV and JSON summaries.

use std::io::Write;

use serde::Serialize;

use super::campaign::{Aggregate, CampaignResults, TrialResult};
use super::config::MethodKind;
use crate::metrics::rate_from_sinr;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Serialize)]
struct TrialRow {
    method: MethodKind,
    #[serde(rename = "L")]
    layers: usize,
    #[serde(rename = "P_T_dBm_per_m2")]
    p_t: f64,
    placement: u64,
    realization: u64,
    user: usize,
    gamma: f64,
    rate_bits: f64,
    sum_rate_bits: f64,
    iterations: usize,
    seconds: Option<f64>,
}

#[derive(Serialize)]
struct AggregateRow {
    method: MethodKind,
    #[serde(rename = "L")]
    layers: usize,
    #[serde(rename = "P_T_dBm_per_m2")]
    p_t: f64,
    count: usize,
    mean_sum_rate_bits: f64,
    std_sum_rate_bits: f64,
    ci95_bits: f64,
    mean_throughput_bps: f64,
    mean_iterations: f64,
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv serialisation: {other:?}")),
    }
}

/// One row per (trial, user).
pub fn write_trials_csv<W: Write>(w: W, trials: &[TrialResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in trials {
        for (user, gamma) in t.gamma.iter().enumerate() {
            out.serialize(TrialRow {
                method: t.method,
                layers: t.layers,
                p_t: t.p_t_dbm_per_m2,
                placement: t.placement,
                realization: t.realization,
                user,
                gamma: *gamma,
                rate_bits: rate_from_sinr(*gamma),
                sum_rate_bits: t.sum_rate,
                iterations: t.iterations,
                seconds: t.seconds,
            })
            .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per (method, L, P_T); this is also the plotting table for sweeps.
pub fn write_aggregates_csv<W: Write>(w: W, aggregates: &[Aggregate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for a in aggregates {
        out.serialize(AggregateRow {
            method: a.method,
            layers: a.layers,
            p_t: a.p_t_dbm_per_m2,
            count: a.count,
            mean_sum_rate_bits: a.mean_sum_rate,
            std_sum_rate_bits: a.std_sum_rate,
            ci95_bits: a.ci95,
            mean_throughput_bps: a.mean_throughput_bps,
            mean_iterations: a.mean_iterations,
        })
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Numerical(format!("json serialisation: {e}")))?;
    writeln!(w)?;
    Ok(())
}

/// Writes the campaign in the requested format.
pub fn write_results<W: Write>(w: W, results: &CampaignResults, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => write_trials_csv(w, &results.trials),
        OutputFormat::Json => write_json(w, results),
    }
}

pub fn write_summary<W: Write>(w: W, aggregates: &[Aggregate], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => write_aggregates_csv(w, aggregates),
        OutputFormat::Json => write_json(w, aggregates),
    }
}
