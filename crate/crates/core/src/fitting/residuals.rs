use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::powerlaw::{fast_approach_data, fast_approach_result, fit};
use super::{effective_mass_from_gamma, names, FitResult, QSpec};
use crate::error::{Error, Result};
use crate::models::Cylinder;
use crate::synth::CalibrationPoint;

/// What is needed to turn `ν²` residuals into distances and forces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSetup {
    pub cylinder: Cylinder,
    /// Actuation coefficient (m/V).
    pub beta: f64,
    /// Minimizing potential assumed for the calibration of `m_eff` (V).
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub v_pzt: f64,
    /// Gap from the far-window fit, `β(V0_PZT − V_PZT)` (m).
    pub d: f64,
    /// `ν² − ν²_fit` (Hz²).
    pub nu_sq_residual: f64,
    pub sigma_nu_sq: f64,
    /// Uncertainty of the extrapolated fit at this point, from the fit
    /// covariance (Hz²).
    pub sigma_model: f64,
    /// Residual attractive force, zero at the farthest fitted point (N).
    pub force_residual: f64,
    pub in_fit_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub v_bias: f64,
    pub fit: FitResult,
    /// Effective mass implied by the fitted amplitude (kg).
    pub m_eff: f64,
    /// Gap at which the force residual is anchored to zero (m).
    pub d_anchor: f64,
    /// Evaluation-window rows, closest first.
    pub rows: Vec<ResidualRow>,
}

fn inside(w: (f64, f64), x: f64) -> bool {
    x >= w.0.min(w.1) && x <= w.0.max(w.1)
}

/// Fit `ν² = ν₀² − A(V0_PZT − V_PZT)^{−2.5}` on the points of a constant-bias
/// approach that fall in `fit_window` (piezo voltages), then evaluate
/// residuals over `eval_window`.
///
/// The residual force follows from `Δν² = (1/4π²m_eff)·∂F/∂d`, integrated by
/// the trapezoid rule from the farthest fitted point, where it is set to zero.
/// `m_eff` comes from `A = γ(V_bias − V₀)²` and the definition of `γ`.
pub fn residual_analysis(
    points: &[CalibrationPoint],
    fit_window: (f64, f64),
    eval_window: (f64, f64),
    setup: &ResidualSetup,
) -> Result<ResidualReport> {
    let Some(first) = points.first() else {
        return Err(Error::InsufficientData("no points for residual analysis".into()));
    };
    let v_bias = first.v_bias;
    if points.iter().any(|p| p.v_bias != v_bias) {
        return Err(Error::InsufficientData(
            "residual analysis works on a single bias; split the run first".into(),
        ));
    }
    let fitted: Vec<CalibrationPoint> = points
        .iter()
        .copied()
        .filter(|p| inside(fit_window, p.v_pzt))
        .collect();
    let spec = QSpec::Fixed(2.5);
    let (sol, sig) = fit(&fast_approach_data(&fitted), spec, true)?;
    let report_fit = fast_approach_result(&sol, &sig, fitted.len(), spec);
    let amplitude = report_fit.param(names::AMPLITUDE);
    let dv = v_bias - setup.v0;
    let gamma = amplitude / (dv * dv);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonConvergence {
            reason: format!(
                "far-window fit gives amplitude {amplitude:e} Hz² at bias offset {dv} V; cannot calibrate the mass"
            ),
            trace: vec![[sol.x0, sol.q, sol.chi2]],
        });
    }
    let m_eff = effective_mass_from_gamma(gamma, &setup.cylinder, setup.beta)?;

    let mut rows = Vec::new();
    for p in points {
        let fit_in = inside(fit_window, p.v_pzt);
        if !fit_in && !inside(eval_window, p.v_pzt) {
            continue;
        }
        if p.v_pzt >= sol.x0 {
            return Err(Error::Contact {
                v_pzt: p.v_pzt,
                v0_pzt: sol.x0,
            });
        }
        let u = sol.x0 - p.v_pzt;
        let phi = u.powf(-2.5);
        let model = sol.offset + sol.gamma * phi;
        // Slots of the covariance: γ, X₀, K⁰.
        let grad = DVector::from_vec(vec![phi, -2.5 * sol.gamma * phi / u, 1.0]);
        let var_model = (grad.transpose() * &sig.cov * &grad)[(0, 0)];
        rows.push(ResidualRow {
            v_pzt: p.v_pzt,
            d: setup.beta * u,
            nu_sq_residual: p.nu * p.nu - model,
            sigma_nu_sq: 2.0 * p.nu * p.sigma_nu,
            sigma_model: var_model.max(0.0).sqrt(),
            force_residual: 0.0,
            in_fit_window: fit_in,
        });
    }
    rows.sort_by(|a, b| a.d.total_cmp(&b.d));
    let d_anchor = rows
        .iter()
        .filter(|r| r.in_fit_window)
        .map(|r| r.d)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut cumulative = vec![0.0; rows.len()];
    for i in 1..rows.len() {
        let h = rows[i].d - rows[i - 1].d;
        cumulative[i] =
            cumulative[i - 1] + 0.5 * h * (rows[i].nu_sq_residual + rows[i - 1].nu_sq_residual);
    }
    let anchor = rows
        .iter()
        .position(|r| r.in_fit_window && r.d == d_anchor)
        .expect("fit window is non-empty");
    let c_anchor = cumulative[anchor];
    let scale = 4.0 * PI * PI * m_eff;
    for (r, c) in rows.iter_mut().zip(&cumulative) {
        r.force_residual = -scale * (c_anchor - c);
    }
    rows.retain(|r| inside(eval_window, r.v_pzt));
    Ok(ResidualReport {
        v_bias,
        fit: report_fit,
        m_eff,
        d_anchor,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Resonator;
    use crate::synth::{
        generate_fast_approach_run, ForceModel, NoiseModel, PiezoMap, Scenario, V0Profile,
    };
    use approx::assert_relative_eq;

    fn scenario(force: ForceModel) -> Scenario {
        Scenario {
            cylinder: Cylinder::new(12e-3, 4e-3, 4e-3).unwrap(),
            resonator: Resonator::new(1e-5, 1e4).unwrap(),
            force,
            v0_profile: V0Profile::Constant { v0: 0.163 },
            noise: NoiseModel::quiet(0.001),
        }
    }

    fn map() -> PiezoMap {
        PiezoMap::new(91.9e-9, 79.52).unwrap()
    }

    fn approach() -> Vec<f64> {
        (0..120).map(|i| 30.0 + 0.4 * i as f64).collect()
    }

    #[test]
    fn coulomb_residuals_vanish_and_mass_is_recovered() {
        let sc = scenario(ForceModel::PureCoulomb);
        let pts = generate_fast_approach_run(&sc, &map(), 0, &approach(), &[4.0]).unwrap();
        let setup = ResidualSetup {
            cylinder: sc.cylinder,
            beta: 91.9e-9,
            v0: 0.163,
        };
        let r = residual_analysis(&pts, (30.0, 70.0), (30.0, 78.0), &setup).unwrap();
        assert_relative_eq!(r.m_eff, 1e-5, max_relative = 1e-6);
        assert_relative_eq!(r.fit.param("V0_PZT"), 79.52, max_relative = 1e-9);
        for row in &r.rows {
            assert!(row.nu_sq_residual.abs() < 1e-8 * 1e8, "{row:?}");
            // The Coulomb force itself is ~1e-5 N here.
            assert!(row.force_residual.abs() < 1e-12, "{row:?}");
        }
        assert_relative_eq!(r.d_anchor, 91.9e-9 * 49.52, max_relative = 1e-9);
        assert!(r.rows.windows(2).all(|w| w[0].d < w[1].d));
    }

    #[test]
    fn extra_force_gives_negative_residual_and_attractive_force() {
        let sc = scenario(ForceModel::ExtraPower {
            alpha1: 30.0,
            alpha2: 0.3,
            p: 5.0,
            length_unit: 1e-6,
        });
        let pts = generate_fast_approach_run(&sc, &map(), 0, &approach(), &[4.0]).unwrap();
        let setup = ResidualSetup {
            cylinder: sc.cylinder,
            beta: 91.9e-9,
            v0: 0.163,
        };
        let r = residual_analysis(&pts, (30.0, 60.0), (30.0, 78.0), &setup).unwrap();
        let closest = &r.rows[0];
        assert!(closest.nu_sq_residual < 0.0);
        assert!(closest.force_residual > 0.0);
        let anchored = r.rows.iter().find(|x| x.d == r.d_anchor).unwrap();
        assert_eq!(anchored.force_residual, 0.0);
    }

    #[test]
    fn rejects_mixed_biases_and_nulled_bias() {
        let sc = scenario(ForceModel::PureCoulomb);
        let pts = generate_fast_approach_run(&sc, &map(), 0, &approach(), &[3.0, 4.0]).unwrap();
        let setup = ResidualSetup {
            cylinder: sc.cylinder,
            beta: 91.9e-9,
            v0: 0.163,
        };
        assert!(residual_analysis(&pts, (30.0, 70.0), (30.0, 78.0), &setup).is_err());
        let pts = generate_fast_approach_run(&sc, &map(), 0, &approach(), &[4.0]).unwrap();
        let wrong = ResidualSetup { v0: 4.0, ..setup };
        assert!(residual_analysis(&pts, (30.0, 70.0), (30.0, 78.0), &wrong).is_err());
    }
}
