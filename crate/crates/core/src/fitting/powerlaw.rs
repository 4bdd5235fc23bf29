use std::cell::RefCell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{names, CurvatureSample, FitResult, QSpec};
use crate::error::{Error, Result};
use crate::optimize::{brent, grid_then_brent, linspace};
use crate::synth::CalibrationPoint;

pub(crate) const Q_MIN: f64 = 0.01;
pub(crate) const Q_MAX: f64 = 10.0;
const Q_GRID_POINTS: usize = 41;
const T_GRID_POINTS: usize = 121;
/// `X₀ − max(x)` is searched over `[span·LOW, span·HIGH]`.
const GAP_LOW: f64 = 1e-6;
const GAP_HIGH: f64 = 1e3;
const TRACE_LEN: usize = 8;

/// Weighted samples of `y(x)` for the model `γ(X₀ − x)^{−q} [+ K⁰]`.
pub(crate) struct Data {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Solution {
    pub x0: f64,
    pub q: f64,
    pub gamma: f64,
    pub offset: f64,
    pub chi2: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Sigmas {
    pub x0: f64,
    pub q: f64,
    pub gamma: f64,
    pub offset: f64,
    /// Covariance `2H⁻¹` over `(γ, X₀[, q][, K⁰])`.
    pub cov: DMatrix<f64>,
}

impl Data {
    fn x_max(&self) -> f64 {
        self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn x_min(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Best `(γ, K⁰, χ²)` for fixed `X₀` and `q`.
    fn linear(&self, x0: f64, q: f64, offset: bool) -> (f64, f64, f64) {
        let phi: Vec<f64> = self.x.iter().map(|&x| (-q * (x0 - x).ln()).exp()).collect();
        let (gamma, k0) = if offset {
            let wsum: f64 = self.w.iter().sum();
            let mut pm = 0.0;
            let mut ym = 0.0;
            for i in 0..phi.len() {
                pm += self.w[i] * phi[i];
                ym += self.w[i] * self.y[i];
            }
            pm /= wsum;
            ym /= wsum;
            let mut spp = 0.0;
            let mut spy = 0.0;
            for i in 0..phi.len() {
                let dp = phi[i] - pm;
                spp += self.w[i] * dp * dp;
                spy += self.w[i] * dp * (self.y[i] - ym);
            }
            let g = spy / spp;
            (g, ym - g * pm)
        } else {
            let mut spp = 0.0;
            let mut spy = 0.0;
            for i in 0..phi.len() {
                spp += self.w[i] * phi[i] * phi[i];
                spy += self.w[i] * phi[i] * self.y[i];
            }
            (spy / spp, 0.0)
        };
        let chi2 = phi
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((p, y), w)| {
                let r = y - gamma * p - k0;
                w * r * r
            })
            .sum();
        (gamma, k0, chi2)
    }

    /// Best `q` at fixed `X₀`.
    fn best_q(&self, x0: f64, offset: bool) -> (f64, f64) {
        let grid = linspace(Q_MIN, Q_MAX, Q_GRID_POINTS);
        let m = grid_then_brent(|q| self.linear(x0, q, offset).2, &grid, 1e-11);
        (m.x, m.fx)
    }
}

pub(crate) fn n_free(q: QSpec, offset: bool) -> usize {
    2 + usize::from(matches!(q, QSpec::Free)) + usize::from(offset)
}

pub(crate) fn fit(data: &Data, q: QSpec, offset: bool) -> Result<(Solution, Sigmas)> {
    let n = data.x.len();
    let k = n_free(q, offset);
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "power-law fit with {k} free parameters needs more than {k} points, got {n}"
        )));
    }
    if let Some(bad) = data.w.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain {
            quantity: "fit weight",
            requirement: "strictly positive and finite (sigma > 0)",
            value: *bad,
        });
    }
    if let QSpec::Fixed(qv) = q {
        if !(qv > 0.0) || !qv.is_finite() {
            return Err(Error::Domain {
                quantity: "fixed exponent",
                requirement: "strictly positive and finite",
                value: qv,
            });
        }
    }
    let x_max = data.x_max();
    let span = x_max - data.x_min();
    if !(span > 0.0) {
        return Err(Error::Degenerate("all piezo voltages coincide".into()));
    }

    let trace = RefCell::new(Vec::<[f64; 3]>::new());
    let profile = |t: f64| {
        let x0 = x_max + t.exp();
        let (qv, chi2) = match q {
            QSpec::Fixed(qv) => (qv, data.linear(x0, qv, offset).2),
            QSpec::Free => data.best_q(x0, offset),
        };
        let mut tr = trace.borrow_mut();
        if tr.len() == TRACE_LEN {
            tr.remove(0);
        }
        tr.push([x0, qv, chi2]);
        chi2
    };
    let (t_lo, t_hi) = ((span * GAP_LOW).ln(), (span * GAP_HIGH).ln());
    let grid = linspace(t_lo, t_hi, T_GRID_POINTS);
    let coarse: Vec<f64> = grid.iter().map(|&t| profile(t)).collect();
    let best = coarse
        .iter()
        .enumerate()
        .fold(0, |b, (i, &c)| if c < coarse[b] || !coarse[b].is_finite() { i } else { b });
    if !coarse[best].is_finite() || best == 0 || best + 1 == grid.len() {
        return Err(Error::NonConvergence {
            reason: format!(
                "contact voltage search ended at the edge of V0_PZT − max(V_PZT) ∈ [{:e}, {:e}] V",
                span * GAP_LOW,
                span * GAP_HIGH
            ),
            trace: trace.into_inner(),
        });
    }
    let m = brent(profile, grid[best - 1], grid[best + 1], 1e-13, 300);
    let t = if m.fx <= coarse[best] { m.x } else { grid[best] };
    let x0 = x_max + t.exp();
    let qv = match q {
        QSpec::Fixed(qv) => qv,
        QSpec::Free => data.best_q(x0, offset).0,
    };
    let (gamma, k0, chi2) = data.linear(x0, qv, offset);
    if !gamma.is_finite() || !chi2.is_finite() {
        return Err(Error::NonConvergence {
            reason: "non-finite amplitude at the optimum".into(),
            trace: trace.into_inner(),
        });
    }
    let sol = Solution {
        x0,
        q: qv,
        gamma,
        offset: k0,
        chi2,
    };
    let sig = uncertainties(data, &sol, matches!(q, QSpec::Free), offset)?;
    Ok((sol, sig))
}

/// `σᵢ = √(2[H⁻¹]ᵢᵢ)` from the analytic Hessian of χ² in `(γ, X₀[, q][, K⁰])`,
/// falling back to the Gauss–Newton approximation when `H` is not positive
/// definite.
fn uncertainties(data: &Data, s: &Solution, free_q: bool, offset: bool) -> Result<Sigmas> {
    // Parameter slots: 0 γ, 1 X₀, then q and K⁰ if free.
    let iq = free_q.then_some(2);
    let ik = offset.then_some(2 + usize::from(free_q));
    let k = 2 + usize::from(free_q) + usize::from(offset);
    let mut h = DMatrix::<f64>::zeros(k, k);
    let mut gn = DMatrix::<f64>::zeros(k, k);
    for i in 0..data.x.len() {
        let u = s.x0 - data.x[i];
        let lu = u.ln();
        let phi = (-s.q * lu).exp();
        let g = s.gamma;
        let q = s.q;
        let r = data.y[i] - (g * phi + s.offset);
        let w = data.w[i];
        let mut jac = vec![0.0; k];
        jac[0] = phi;
        jac[1] = -q * g * phi / u;
        if let Some(j) = iq {
            jac[j] = -g * phi * lu;
        }
        if let Some(j) = ik {
            jac[j] = 1.0;
        }
        let mut second = DMatrix::<f64>::zeros(k, k);
        second[(0, 1)] = -q * phi / u;
        second[(1, 1)] = q * (q + 1.0) * g * phi / (u * u);
        if let Some(j) = iq {
            second[(0, j)] = -phi * lu;
            second[(1, j)] = g * phi / u * (q * lu - 1.0);
            second[(j, j)] = g * phi * lu * lu;
        }
        for a in 0..k {
            for b in a..k {
                let jj = jac[a] * jac[b];
                let val = 2.0 * w * (jj - r * second[(a, b)]);
                h[(a, b)] += val;
                gn[(a, b)] += 2.0 * w * jj;
                if a != b {
                    h[(b, a)] += val;
                    gn[(b, a)] += 2.0 * w * jj;
                }
            }
        }
    }
    let cov = scaled_inverse(&h)
        .or_else(|| scaled_inverse(&gn))
        .ok_or_else(|| Error::Degenerate("singular curvature matrix at the optimum".into()))?;
    let cov = 2.0 * cov;
    let sd = |j: usize| cov[(j, j)].max(0.0).sqrt();
    Ok(Sigmas {
        gamma: sd(0),
        x0: sd(1),
        q: iq.map_or(0.0, sd),
        offset: ik.map_or(0.0, sd),
        cov,
    })
}

/// Inverse of a symmetric positive-definite matrix after diagonal scaling;
/// `None` when it is not positive definite.
fn scaled_inverse(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = h.nrows();
    if (0..k).any(|i| !(h[(i, i)] > 0.0)) {
        return None;
    }
    let d = DVector::from_iterator(k, (0..k).map(|i| 1.0 / h[(i, i)].sqrt()));
    let scaled = DMatrix::from_fn(k, k, |i, j| h[(i, j)] * d[i] * d[j]);
    let inv = scaled.cholesky()?.inverse();
    Some(DMatrix::from_fn(k, k, |i, j| inv[(i, j)] * d[i] * d[j]))
}

fn result(
    sol: &Solution,
    sig: &Sigmas,
    n: usize,
    q: QSpec,
    offset: bool,
    amplitude: (&str, f64),
    constant: &str,
) -> FitResult {
    let mut params = BTreeMap::new();
    let mut sigmas = BTreeMap::new();
    params.insert(amplitude.0.to_string(), amplitude.1 * sol.gamma);
    sigmas.insert(amplitude.0.to_string(), sig.gamma);
    params.insert(names::V0_PZT.to_string(), sol.x0);
    sigmas.insert(names::V0_PZT.to_string(), sig.x0);
    params.insert(names::Q.to_string(), sol.q);
    sigmas.insert(names::Q.to_string(), sig.q);
    if offset {
        params.insert(constant.to_string(), sol.offset);
        sigmas.insert(constant.to_string(), sig.offset);
    }
    let dof = n - n_free(q, offset);
    FitResult {
        params,
        sigmas,
        chi2: sol.chi2,
        dof,
        reduced_chi2: sol.chi2 / dof as f64,
    }
}

pub(crate) fn curvature_data(samples: &[CurvatureSample]) -> Data {
    Data {
        x: samples.iter().map(|s| s.v_pzt).collect(),
        y: samples.iter().map(|s| s.k_el).collect(),
        w: samples.iter().map(|s| 1.0 / (s.sigma_k * s.sigma_k)).collect(),
    }
}

/// Weighted fit of `K_el = γ(V0_PZT − V_PZT)^{−q} [+ K⁰]` with weights `1/σ_K²`.
pub fn fit_curvature_powerlaw(
    samples: &[CurvatureSample],
    q: QSpec,
    offset: bool,
) -> Result<FitResult> {
    let data = curvature_data(samples);
    let (sol, sig) = fit(&data, q, offset)?;
    Ok(result(
        &sol,
        &sig,
        samples.len(),
        q,
        offset,
        (names::GAMMA, 1.0),
        names::OFFSET,
    ))
}

pub(crate) fn fast_approach_data(points: &[CalibrationPoint]) -> Data {
    Data {
        x: points.iter().map(|p| p.v_pzt).collect(),
        y: points.iter().map(|p| p.nu * p.nu).collect(),
        w: points
            .iter()
            .map(|p| {
                let s = 2.0 * p.nu * p.sigma_nu;
                1.0 / (s * s)
            })
            .collect(),
    }
}

pub(crate) fn fast_approach_result(sol: &Solution, sig: &Sigmas, n: usize, q: QSpec) -> FitResult {
    result(sol, sig, n, q, true, (names::AMPLITUDE, -1.0), names::NU0_SQ)
}

/// Fit `ν² = ν₀² − A(V0_PZT − V_PZT)^{−q}` to a constant-bias approach,
/// weighting by `1/(2νσ_ν)²`.
pub fn fit_fast_approach(points: &[CalibrationPoint], q: QSpec) -> Result<FitResult> {
    if let Some(p) = points.iter().find(|p| p.v_bias != points[0].v_bias) {
        return Err(Error::InsufficientData(format!(
            "fast-approach fit needs a single bias, found {} V and {} V",
            points[0].v_bias, p.v_bias
        )));
    }
    let data = fast_approach_data(points);
    let (sol, sig) = fit(&data, q, true)?;
    Ok(fast_approach_result(&sol, &sig, points.len(), q))
}
