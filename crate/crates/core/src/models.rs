//! Closed-form electrostatic and Casimir models.
//!
//! Three configurations are supported: a sphere in front of a plane, a
//! cylinder parallel to a plane and two parallel planes. Curved geometries are
//! treated in the proximity force approximation (PFA) unless stated otherwise.
//!
//! Conventions:
//!
//! - forces are positive magnitudes of an attraction;
//! - squared-frequency shifts `Δν² = ν² − ν₀²` are signed, negative for an
//!   attractive force gradient;
//! - the tilt parameter of a cylinder is `α = L·sin θ / (2d)`, where `d` is
//!   measured from the midpoint of the cylinder axis.
//!
//! The Smythe formula for a long conducting cylinder ([`coulomb_force_cylinder_exact`])
//! and its PFA limit use the physical cylinder length `L`. Everything that
//! depends on how much of the cylinder faces the resonator (frequency shifts,
//! capacitance, the summary formulas of [`coulomb_force_pfa`] and
//! [`casimir_force_ideal`]) uses the effective exposure length `L_eff`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::error::{ensure_positive, ensure_tilt, Error, Result};

/// Below this `|α|` the `(1/α)(…)` tilt factors switch to their Taylor series.
pub const SMALL_TILT: f64 = 1e-6;

/// A cylindrical lens facing a plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    /// Radius of curvature `a` (m).
    pub radius: f64,
    /// Physical length `L` (m).
    pub length: f64,
    /// Effective exposure length `L_eff ≤ L` (m): the smaller of the resonator
    /// width and the cylinder length.
    pub effective_length: f64,
}

impl Cylinder {
    pub fn new(radius: f64, length: f64, effective_length: f64) -> Result<Self> {
        ensure_positive("cylinder radius", radius)?;
        ensure_positive("cylinder length", length)?;
        ensure_positive("effective length", effective_length)?;
        if effective_length > length {
            return Err(Error::Domain {
                quantity: "effective length",
                requirement: "no larger than the cylinder length",
                value: effective_length,
            });
        }
        Ok(Self {
            radius,
            length,
            effective_length,
        })
    }

    /// Cylinder whose whole length faces the plane (`L_eff = L`).
    pub fn fully_exposed(radius: f64, length: f64) -> Result<Self> {
        Self::new(radius, length, length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    SpherePlane,
    CylinderPlane,
    ParallelPlanes,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 3] = [
        GeometryKind::SpherePlane,
        GeometryKind::CylinderPlane,
        GeometryKind::ParallelPlanes,
    ];

    /// Geometry factor ξ of the equivalent Casimir voltage `√(π²/ξ)·√(ħc/ε₀)/d`.
    pub fn xi(self) -> f64 {
        match self {
            GeometryKind::SpherePlane => 360.0,
            GeometryKind::CylinderPlane => 192.0,
            GeometryKind::ParallelPlanes => 120.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::SpherePlane => "sphere-plane",
            GeometryKind::CylinderPlane => "cylinder-plane",
            GeometryKind::ParallelPlanes => "parallel-planes",
        }
    }
}

/// One of the three experimental configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    /// Sphere of radius `R` (m) facing a plane.
    SpherePlane { radius: f64 },
    CylinderPlane(Cylinder),
    /// Two parallel plates of facing area `S` (m²).
    ParallelPlanes { area: f64 },
}

impl Geometry {
    pub fn sphere_plane(radius: f64) -> Result<Self> {
        Ok(Geometry::SpherePlane {
            radius: ensure_positive("sphere radius", radius)?,
        })
    }

    pub fn parallel_planes(area: f64) -> Result<Self> {
        Ok(Geometry::ParallelPlanes {
            area: ensure_positive("plate area", area)?,
        })
    }

    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::SpherePlane { .. } => GeometryKind::SpherePlane,
            Geometry::CylinderPlane(_) => GeometryKind::CylinderPlane,
            Geometry::ParallelPlanes { .. } => GeometryKind::ParallelPlanes,
        }
    }
}

/// Mechanical mode used as the force sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonator {
    /// Effective mass of the mode (kg).
    pub effective_mass: f64,
    /// Unperturbed resonance frequency (Hz).
    pub nu0: f64,
}

impl Resonator {
    pub fn new(effective_mass: f64, nu0: f64) -> Result<Self> {
        ensure_positive("effective mass", effective_mass)?;
        ensure_positive("resonance frequency", nu0)?;
        Ok(Self {
            effective_mass,
            nu0,
        })
    }
}

/// Tilt of the cylinder axis with respect to the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltState {
    /// Deviation angle from parallelism (rad).
    pub theta: f64,
    /// `L·sin θ / (2d)`.
    pub alpha: f64,
}

impl TiltState {
    pub fn new(cylinder: &Cylinder, theta: f64, d: f64) -> Result<Self> {
        ensure_positive("gap", d)?;
        let alpha = ensure_tilt(cylinder.length * theta.sin() / (2.0 * d))?;
        Ok(Self { theta, alpha })
    }

    pub fn parallel() -> Self {
        Self {
            theta: 0.0,
            alpha: 0.0,
        }
    }
}

/// Coulomb force between a long cylinder and a plane held at potential
/// difference `v`, from the image-charge solution:
/// `4πε₀LV² / (Δ ln²((h−Δ)/(h+Δ)))` with `h = d + a`, `Δ = √(h² − a²)`.
///
/// This is the idealised `L ≫ a` result; for a short lens it is only used to
/// check convergence of the PFA expression as `d/a → 0`.
pub fn coulomb_force_cylinder_exact(cylinder: &Cylinder, d: f64, v: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    let a = cylinder.radius;
    let u = d / a;
    // Δ = √(d(d + 2a)); ln((h−Δ)/(h+Δ)) = −2 acosh(1 + d/a), evaluated without
    // cancellation for small d/a.
    let delta = (d * (d + 2.0 * a)).sqrt();
    let acosh = (u + (u * (2.0 + u)).sqrt()).ln_1p();
    Ok(PI * EPSILON_0 * cylinder.length * v * v / (delta * acosh * acosh))
}

/// PFA Coulomb force for the cylinder-plane geometry,
/// `πε₀√a L V² / (2√2 d^{3/2})`.
pub fn coulomb_force_cylinder_pfa(cylinder: &Cylinder, d: f64, v: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok(PI * EPSILON_0 * cylinder.radius.sqrt() * cylinder.length * v * v
        / (2.0 * SQRT_2 * d.powf(1.5)))
}

/// Tilt correction to the PFA force, `(1/α)(1/√(1−α) − 1/√(1+α))`.
pub fn nonparallel_force_factor(alpha: f64) -> Result<f64> {
    ensure_tilt(alpha)?;
    if alpha.abs() < SMALL_TILT {
        return Ok(1.0 + 0.625 * alpha * alpha);
    }
    Ok(((1.0 - alpha).powf(-0.5) - (1.0 + alpha).powf(-0.5)) / alpha)
}

/// Tilt correction to the frequency shift,
/// `(1/3α)((1−α)^{−3/2} − (1+α)^{−3/2}) = 1 + 35α²/24 + O(α⁴)`.
pub fn nonparallel_shift_factor(alpha: f64) -> Result<f64> {
    ensure_tilt(alpha)?;
    if alpha.abs() < SMALL_TILT {
        return Ok(1.0 + 35.0 / 24.0 * alpha * alpha);
    }
    Ok(((1.0 - alpha).powf(-1.5) - (1.0 + alpha).powf(-1.5)) / (3.0 * alpha))
}

/// Tilt correction to the capacitance, `(√(1+α) − √(1−α))/α = 1 + α²/8 + O(α⁴)`.
pub fn capacitance_tilt_factor(alpha: f64) -> Result<f64> {
    ensure_tilt(alpha)?;
    if alpha.abs() < SMALL_TILT {
        return Ok(1.0 + alpha * alpha / 8.0);
    }
    Ok(((1.0 + alpha).sqrt() - (1.0 - alpha).sqrt()) / alpha)
}

/// Curvature coefficient `K_el = 3ε₀√a L_eff / (16√2 π m_eff d^{5/2})` (Hz²/V²).
pub fn curvature_coefficient(cylinder: &Cylinder, resonator: &Resonator, d: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok(curvature_prefactor(cylinder, resonator) / d.powf(2.5))
}

/// `K_el·d^{5/2}`, the distance-independent part of the curvature coefficient.
pub fn curvature_prefactor(cylinder: &Cylinder, resonator: &Resonator) -> f64 {
    3.0 * EPSILON_0 * cylinder.radius.sqrt() * cylinder.effective_length
        / (16.0 * SQRT_2 * PI * resonator.effective_mass)
}

/// Squared-frequency shift of the resonator induced by a bias `v` when the
/// minimizing potential is `v0`, including the tilt correction.
///
/// At `alpha = 0` this is exactly `−K_el (V − V₀)²`.
pub fn electrostatic_freq_shift(
    cylinder: &Cylinder,
    resonator: &Resonator,
    d: f64,
    v: f64,
    v0: f64,
    alpha: f64,
) -> Result<f64> {
    let k = curvature_coefficient(cylinder, resonator, d)?;
    let tilt = nonparallel_shift_factor(alpha)?;
    let dv = v - v0;
    Ok(-k * tilt * dv * dv)
}

/// PFA capacitance of the cylinder-plane pair (F).
pub fn capacitance_cylinder_pfa(cylinder: &Cylinder, d: f64, alpha: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    let tilt = capacitance_tilt_factor(alpha)?;
    Ok(2.0 * PI * EPSILON_0 * cylinder.effective_length * (cylinder.radius / (2.0 * d)).sqrt()
        * tilt)
}

/// Ideal (perfect reflectors, zero temperature) Casimir force, PFA for the
/// curved geometries.
pub fn casimir_force_ideal(geometry: &Geometry, d: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    let hc = HBAR * SPEED_OF_LIGHT;
    Ok(match geometry {
        Geometry::SpherePlane { radius } => PI.powi(3) / 360.0 * hc * radius / d.powi(3),
        Geometry::CylinderPlane(c) => {
            PI.powi(3) / (384.0 * SQRT_2) * hc * c.effective_length * c.radius.sqrt() / d.powf(3.5)
        }
        Geometry::ParallelPlanes { area } => PI * PI / 240.0 * hc * area / d.powi(4),
    })
}

/// PFA Coulomb force for each geometry.
pub fn coulomb_force_pfa(geometry: &Geometry, d: f64, v: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    let v2 = v * v;
    Ok(match geometry {
        Geometry::SpherePlane { radius } => PI * EPSILON_0 * radius * v2 / d,
        Geometry::CylinderPlane(c) => {
            PI * EPSILON_0 / (2.0 * SQRT_2) * c.effective_length * c.radius.sqrt() * v2
                / d.powf(1.5)
        }
        Geometry::ParallelPlanes { area } => EPSILON_0 / 2.0 * area * v2 / (d * d),
    })
}

/// Bias voltage whose PFA Coulomb force equals the ideal Casimir force at gap `d`.
pub fn equivalent_casimir_voltage(kind: GeometryKind, d: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    Ok((PI * PI / kind.xi()).sqrt() * (HBAR * SPEED_OF_LIGHT / EPSILON_0).sqrt() / d)
}
