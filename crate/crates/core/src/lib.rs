//! Electrostatic calibration toolkit for Casimir-force experiments in the
//! cylinder-plane geometry.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: closed-form Coulomb and Casimir forces, capacitance and
//!   frequency-shift models for sphere-plane, cylinder-plane and parallel-plane
//!   configurations, including tilt corrections.
//! - [`deformations`]: frequency shifts of a cylinder with a flat facet or a
//!   triangular tip, and the effective power-law exponent they produce.
//! - [`patches`]: patch-potential energy and force integrals over a power
//!   spectral density.
//! - [`synth`]: seedable synthetic calibration runs (curvature technique and
//!   fast approach), including a hypothetical steeper extra force.
//! - [`fitting`]: parabola fits, weighted power-law fits, exponent and
//!   truncation scans, residual analysis.
//! - [`dataset`] and [`config`]: the on-disk formats used by the CLI.
//!
//! All quantities are SI. Forces are returned as positive magnitudes of an
//! attraction; squared-frequency shifts are signed and negative for an
//! attractive force gradient.

pub mod config;
pub mod constants;
pub mod dataset;
pub mod deformations;
mod error;
pub mod fitting;
pub mod models;
mod optimize;
pub mod patches;
pub mod quad;
pub mod synth;

pub use error::{Error, Result};
