use nalgebra::{Matrix3, Vector3};

use super::CurvatureSample;
use crate::error::{Error, Result};
use crate::synth::CalibrationPoint;

/// Fit `ν² = c₀ + c₁V + c₂V²` to a bias sweep at a single piezo voltage.
///
/// Points are weighted by `1/(2νσ_ν)²` when every `σ_ν` is positive;
/// otherwise the fit is unweighted and the covariance is scaled by the
/// residual variance.
pub fn fit_parabola(points: &[CalibrationPoint]) -> Result<CurvatureSample> {
    let Some(first) = points.first() else {
        return Err(Error::InsufficientData("empty bias sweep".into()));
    };
    let v_pzt = first.v_pzt;
    let mut biases: Vec<f64> = points.iter().map(|p| p.v_bias).collect();
    biases.sort_by(f64::total_cmp);
    biases.dedup();
    if biases.len() < 3 {
        return Err(Error::Degenerate(format!(
            "parabola at V_PZT = {v_pzt} V needs 3 distinct biases, got {}",
            biases.len()
        )));
    }
    let weighted = points.iter().all(|p| p.sigma_nu > 0.0);
    let weights: Vec<f64> = points
        .iter()
        .map(|p| {
            if weighted {
                let s = 2.0 * p.nu * p.sigma_nu;
                1.0 / (s * s)
            } else {
                1.0
            }
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let centre = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * p.v_bias)
        .sum::<f64>()
        / wsum;

    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (p, &w) in points.iter().zip(&weights) {
        let x = p.v_bias - centre;
        let row = Vector3::new(1.0, x, x * x);
        normal += w * row * row.transpose();
        rhs += w * p.nu * p.nu * row;
    }
    let chol = normal.cholesky().ok_or_else(|| {
        Error::Degenerate(format!("parabola design at V_PZT = {v_pzt} V is singular"))
    })?;
    let b = chol.solve(&rhs);
    let mut cov = chol.inverse();
    if !weighted {
        let chi2: f64 = points
            .iter()
            .map(|p| {
                let x = p.v_bias - centre;
                let r = p.nu * p.nu - (b[0] + b[1] * x + b[2] * x * x);
                r * r
            })
            .sum();
        let dof = points.len().saturating_sub(3);
        cov *= if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    }

    let (b0, b1, b2) = (b[0], b[1], b[2]);
    if b2 >= 0.0 {
        return Err(Error::NonAttractive { v_pzt, c2: b2 });
    }
    let v0 = centre - b1 / (2.0 * b2);
    let nu0_sq = b0 - b1 * b1 / (4.0 * b2);
    let j_v0 = Vector3::new(0.0, -1.0 / (2.0 * b2), b1 / (2.0 * b2 * b2));
    Ok(CurvatureSample {
        v_pzt,
        k_el: -b2,
        sigma_k: cov[(2, 2)].max(0.0).sqrt(),
        v0,
        sigma_v0: (j_v0.transpose() * cov * j_v0)[(0, 0)].max(0.0).sqrt(),
        nu0_sq,
    })
}

/// Split a run into bias sweeps by `(run_id, V_PZT)` and fit each, in order of
/// first appearance.
pub fn fit_parabolas(points: &[CalibrationPoint]) -> Result<Vec<CurvatureSample>> {
    let mut groups: Vec<((u32, u64), Vec<CalibrationPoint>)> = Vec::new();
    for p in points {
        let key = (p.run_id, p.v_pzt.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(*p),
            None => groups.push((key, vec![*p])),
        }
    }
    groups.iter().map(|(_, g)| fit_parabola(g)).collect()
}
