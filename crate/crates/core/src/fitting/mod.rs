//! Calibration analysis: parabola fits at fixed gap, weighted power-law fits
//! of the curvature (or of `ν²` in a fast approach), exponent and truncation
//! scans, residual analysis and effective-mass extraction.
//!
//! Power-law fits use the model `y = γ(X₀ − x)^{−q} [+ K⁰]` in the piezo
//! voltage `x`. For fixed `X₀` and `q` it is linear in `γ` and `K⁰`, which are
//! solved exactly; `X₀` (and `q` when free) are found by a nested grid plus
//! Brent search. Uncertainties use `σᵢ = √(2[H⁻¹]ᵢᵢ)` with `H` the analytic
//! Hessian of χ².

mod parabola;
mod powerlaw;
mod residuals;
mod scans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result};
use crate::models::Cylinder;

pub use parabola::{fit_parabola, fit_parabolas};
pub use powerlaw::{fit_curvature_powerlaw, fit_fast_approach};
pub use residuals::{residual_analysis, ResidualReport, ResidualRow, ResidualSetup};
pub use scans::{
    default_q_grid, exponent_chi2_scan, fast_approach_truncation, truncation_scan,
    ApproachTruncationRow, ExponentScan, TruncationOptions, TruncationRow,
};

/// Per-gap product of a parabola fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub v_pzt: f64,
    /// Curvature coefficient (Hz²/V²).
    pub k_el: f64,
    pub sigma_k: f64,
    /// Minimizing potential (V).
    pub v0: f64,
    pub sigma_v0: f64,
    /// Squared free resonance frequency (Hz²).
    pub nu0_sq: f64,
}

/// Whether the exponent is held fixed or fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpec {
    Fixed(f64),
    Free,
}

/// Parameter names used in [`FitResult`].
pub mod names {
    pub const GAMMA: &str = "gamma";
    pub const V0_PZT: &str = "V0_PZT";
    pub const Q: &str = "q";
    pub const OFFSET: &str = "offset";
    /// Fast-approach amplitude `A` in `ν² = ν₀² − A(V0_PZT − V_PZT)^{−q}`.
    pub const AMPLITUDE: &str = "A";
    pub const NU0_SQ: &str = "nu0_sq";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    /// One-sigma uncertainties; zero for parameters held fixed.
    pub sigmas: BTreeMap<String, f64>,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
}

impl FitResult {
    /// Value of a named parameter. Panics if the fit does not have it.
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.sigmas[name]
    }
}

/// `m_eff` from the calibration factor `γ = 3ε₀√a L_eff / (16√2 π m_eff β^{5/2})`,
/// with `β` in m/V and `γ` in Hz²·V^{1/2}.
pub fn effective_mass_from_gamma(gamma: f64, cylinder: &Cylinder, beta: f64) -> Result<f64> {
    ensure_positive("gamma", gamma)?;
    ensure_positive("beta", beta)?;
    Ok(mass_numerator(cylinder) / (gamma * beta.powf(2.5)))
}

/// Inverse of [`effective_mass_from_gamma`].
pub fn gamma_from_effective_mass(m_eff: f64, cylinder: &Cylinder, beta: f64) -> Result<f64> {
    ensure_positive("effective mass", m_eff)?;
    ensure_positive("beta", beta)?;
    Ok(mass_numerator(cylinder) / (m_eff * beta.powf(2.5)))
}

fn mass_numerator(cylinder: &Cylinder) -> f64 {
    use std::f64::consts::{PI, SQRT_2};
    3.0 * crate::constants::EPSILON_0 * cylinder.radius.sqrt() * cylinder.effective_length
        / (16.0 * SQRT_2 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{curvature_coefficient, Resonator};
    use approx::assert_relative_eq;

    #[test]
    fn mass_round_trip_and_scaling() {
        let cyl = Cylinder::new(12e-3, 4e-3, 3e-3).unwrap();
        let beta = 91.9e-9;
        let g = gamma_from_effective_mass(2.5e-5, &cyl, beta).unwrap();
        assert_relative_eq!(
            effective_mass_from_gamma(g, &cyl, beta).unwrap(),
            2.5e-5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            effective_mass_from_gamma(2.0 * g, &cyl, beta).unwrap(),
            1.25e-5,
            max_relative = 1e-12
        );
        assert!(effective_mass_from_gamma(0.0, &cyl, beta).is_err());
        // γ(V0_PZT − V_PZT)^{−5/2} is the curvature coefficient at d = β(V0_PZT − V_PZT).
        let res = Resonator::new(2.5e-5, 1e3).unwrap();
        let dv: f64 = 7.0;
        assert_relative_eq!(
            g * dv.powf(-2.5),
            curvature_coefficient(&cyl, &res, beta * dv).unwrap(),
            max_relative = 1e-12
        );
    }
}
