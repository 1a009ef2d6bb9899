//! Uplink simulation for a base station whose receive aperture is a stacked
//! intelligent metasurface (SIM).
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`] lays out the aperture, the metasurface layers and the
//!   digital backplane, and builds the fixed dipole-model propagation matrices.
//! - [`channel`] draws correlated Rayleigh channels, computes the noise budget
//!   and reads/writes binary channel ensembles.
//! - [`combiner`] cascades the layers into the wave-domain combiner and builds
//!   the matched-filter and digital-array baselines.
//! - [`metrics`] evaluates per-user SINR and the sum-rate.
//! - [`optim`] maximises the sum-rate over every unit-cell phase.
//! - [`harness`] runs seeded Monte Carlo campaigns and writes results.

pub mod channel;
pub mod combiner;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// A point in space, in meters.
pub type Point = nalgebra::Point3<f64>;
