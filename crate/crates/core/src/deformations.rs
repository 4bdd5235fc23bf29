//! PFA frequency shifts for a cylinder with a local deformation along its
//! whole length, and the effective exponent `B` of `Δν² = −A/d^B` they imply.
//!
//! The energy profiles `f(d)` below are normalized so that an undeformed
//! cylinder gives `f = (π/2)√(2a/d)`, and the shift is
//! `Δν² = −ε₀ L_eff (V − V₀)² / (4π² m_eff) · f''(d)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::models::{Cylinder, Resonator};

use crate::constants::EPSILON_0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deformation {
    /// Flat facet of width `2b` at the point of closest approach.
    FlatFacet { half_width: f64 },
    /// Triangular tip of width `2b` and height `b'`.
    TriangularTip { half_width: f64, height: f64 },
}

impl Deformation {
    pub fn flat(half_width: f64) -> Result<Self> {
        Ok(Deformation::FlatFacet {
            half_width: ensure_positive("facet half-width", half_width)?,
        })
    }

    pub fn tip(half_width: f64, height: f64) -> Result<Self> {
        Ok(Deformation::TriangularTip {
            half_width: ensure_positive("tip half-width", half_width)?,
            height: ensure_positive("tip height", height)?,
        })
    }
}

/// Contribution of the cylinder outside a central strip of half-width `b`:
/// `√(2a/d)·atan(√(2ad/b²))`.
pub fn profile_f_inc(d: f64, radius: f64, half_width: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok((2.0 * radius / d).sqrt() * ((2.0 * radius * d).sqrt() / half_width).atan())
}

/// Contribution of a flat facet, `b/d`.
pub fn profile_f_flat(d: f64, half_width: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok(half_width / d)
}

/// Contribution of a triangular tip, `(b/b')·ln(1 + b'/d)`.
pub fn profile_f_tip(d: f64, half_width: f64, height: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok(half_width / height * (height / d).ln_1p())
}

fn f_flat_second(d: f64, b: f64) -> f64 {
    2.0 * b / (d * d * d)
}

fn f_tip_second(d: f64, b: f64, bp: f64) -> f64 {
    b * (2.0 * d + bp) / (d * d * (d + bp) * (d + bp))
}

/// Second derivative of `f_inc` at gap `x` by central differences with step
/// `1e-4·x` and one Richardson extrapolation.
fn f_inc_second(x: f64, radius: f64, b: f64) -> f64 {
    let f = |y: f64| (2.0 * radius / y).sqrt() * ((2.0 * radius * y).sqrt() / b).atan();
    let central = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let h = 1e-4 * x;
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

/// Second derivative of the total energy profile of a deformed cylinder.
fn profile_second_derivative(deformation: &Deformation, radius: f64, d: f64) -> Result<f64> {
    match *deformation {
        Deformation::FlatFacet { half_width: b } => {
            let shifted = d - b * b / (2.0 * radius);
            if shifted <= 0.0 {
                return Err(Error::Domain {
                    quantity: "gap minus facet sagitta b²/2a",
                    requirement: "strictly positive",
                    value: shifted,
                });
            }
            Ok(f_inc_second(shifted, radius, b) + f_flat_second(d, b))
        }
        Deformation::TriangularTip {
            half_width: b,
            height: bp,
        } => Ok(f_inc_second(d + bp, radius, b) + f_tip_second(d, b, bp)),
    }
}

/// Squared-frequency shift of a deformed cylinder at gap `d` (measured to the
/// deformation) for a bias offset `dv = V − V₀`.
pub fn deformed_freq_shift(
    deformation: &Deformation,
    cylinder: &Cylinder,
    resonator: &Resonator,
    d: f64,
    dv: f64,
) -> Result<f64> {
    ensure_positive("gap", d)?;
    let curvature = profile_second_derivative(deformation, cylinder.radius, d)?;
    Ok(-EPSILON_0 * cylinder.effective_length * dv * dv
        / (4.0 * PI * PI * resonator.effective_mass)
        * curvature)
}

/// Effective exponent `B` from an unweighted least-squares line through
/// `ln|Δν²|` versus `ln d` on `n_points` log-spaced gaps in `d_range`.
pub fn deformation_exponent(
    deformation: &Deformation,
    cylinder: &Cylinder,
    resonator: &Resonator,
    d_range: (f64, f64),
    n_points: usize,
) -> Result<f64> {
    let (lo, hi) = d_range;
    ensure_positive("lower gap", lo)?;
    ensure_positive("upper gap", hi)?;
    if hi <= lo {
        return Err(Error::Domain {
            quantity: "upper gap",
            requirement: "above the lower gap",
            value: hi,
        });
    }
    if n_points < 3 {
        return Err(Error::InsufficientData(format!(
            "exponent fit needs at least 3 gaps, got {n_points}"
        )));
    }
    let step = (hi / lo).ln() / (n_points - 1) as f64;
    let mut xs = Vec::with_capacity(n_points);
    let mut ys = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let d = lo * (step * i as f64).exp();
        let shift = deformed_freq_shift(deformation, cylinder, resonator, d, 1.0)?;
        if shift == 0.0 || !shift.is_finite() {
            return Err(Error::NonConvergence {
                reason: format!("frequency shift vanishes at d = {d:e} m"),
                trace: Vec::new(),
            });
        }
        xs.push(d.ln());
        ys.push(shift.abs().ln());
    }
    let n = n_points as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}
