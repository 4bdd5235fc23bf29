use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::powerlaw::{curvature_data, fit, fit_fast_approach, n_free};
use super::{names, CurvatureSample, QSpec};
use crate::error::{Error, Result};
use crate::synth::CalibrationPoint;

/// Relative tolerance below which grid values count as tied.
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentScan {
    /// `(q, reduced χ²)` for every grid value, in grid order.
    pub rows: Vec<(f64, f64)>,
    pub q_min: f64,
    pub reduced_chi2_min: f64,
    /// Several grid values share the minimum; `q_min` is the smallest of them.
    pub plateau: bool,
    /// Grid values whose fit failed, with the error; their rows hold NaN.
    #[serde(skip)]
    pub failures: Vec<(f64, Error)>,
}

/// `0.50, 0.51, …, 4.00`.
pub fn default_q_grid() -> Vec<f64> {
    (50..=400).map(|i| i as f64 / 100.0).collect()
}

/// Reduced χ² of the best fit at each fixed exponent on `q_grid`. A failed
/// fit leaves a NaN row and an entry in `failures`; the scan itself fails only
/// when every grid value does.
pub fn exponent_chi2_scan(
    samples: &[CurvatureSample],
    q_grid: &[f64],
    offset: bool,
) -> Result<ExponentScan> {
    if q_grid.is_empty() {
        return Err(Error::InsufficientData("empty exponent grid".into()));
    }
    if let Some(&q) = q_grid.iter().find(|&&q| !(q > 0.0 && q <= 6.0)) {
        return Err(Error::Domain {
            quantity: "scan exponent",
            requirement: "in (0, 6]",
            value: q,
        });
    }
    let data = curvature_data(samples);
    let fits: Vec<Result<f64>> = q_grid
        .par_iter()
        .map(|&q| {
            let spec = QSpec::Fixed(q);
            let (sol, _) = fit(&data, spec, offset)?;
            let dof = samples.len() - n_free(spec, offset);
            Ok(sol.chi2 / dof as f64)
        })
        .collect();
    let mut rows = Vec::with_capacity(q_grid.len());
    let mut failures = Vec::new();
    for (&q, r) in q_grid.iter().zip(fits) {
        match r {
            Ok(c) => rows.push((q, c)),
            Err(e) => {
                rows.push((q, f64::NAN));
                failures.push((q, e));
            }
        }
    }
    if failures.len() == rows.len() {
        return Err(failures.swap_remove(0).1);
    }
    let best = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let tied: Vec<f64> = rows
        .iter()
        .filter(|r| r.1 - best <= TIE * best.abs())
        .map(|r| r.0)
        .collect();
    let q_min = tied.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExponentScan {
        rows,
        q_min,
        reduced_chi2_min: best,
        plateau: tied.len() > 1,
        failures,
    })
}

/// One truncation level: the `removed` closest samples are dropped and both a
/// free-exponent and a fixed-2.5 fit are made on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub removed: usize,
    pub retained: usize,
    /// Piezo voltage of the closest retained sample (V).
    pub v_pzt_closest: f64,
    /// Gap of the closest retained sample according to the fixed-2.5 fit,
    /// `β(V0_PZT − V_PZT)` (m).
    pub nominal_distance: f64,
    pub q: f64,
    pub sigma_q: f64,
    pub gamma_free: f64,
    pub sigma_gamma_free: f64,
    pub v0_pzt_free: f64,
    pub sigma_v0_pzt_free: f64,
    pub reduced_chi2_free: f64,
    pub gamma_fixed: f64,
    pub sigma_gamma_fixed: f64,
    pub v0_pzt_fixed: f64,
    pub sigma_v0_pzt_fixed: f64,
    pub reduced_chi2_fixed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationOptions {
    /// Smallest number of samples kept; at least 6.
    pub min_retained: usize,
    /// Samples removed between consecutive levels.
    pub stride: usize,
    pub offset: bool,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        Self {
            min_retained: 6,
            stride: 1,
            offset: false,
        }
    }
}

/// Progressively remove the closest samples and refit. The last level always
/// keeps exactly `min_retained` samples.
pub fn truncation_scan(
    samples: &[CurvatureSample],
    beta: f64,
    opts: TruncationOptions,
) -> Result<Vec<TruncationRow>> {
    if opts.min_retained < 6 {
        return Err(Error::Domain {
            quantity: "min_retained",
            requirement: "at least 6",
            value: opts.min_retained as f64,
        });
    }
    if opts.stride == 0 {
        return Err(Error::Domain {
            quantity: "truncation stride",
            requirement: "at least 1",
            value: 0.0,
        });
    }
    let n = samples.len();
    if n < opts.min_retained {
        return Err(Error::InsufficientData(format!(
            "truncation scan needs at least {} samples, got {n}",
            opts.min_retained
        )));
    }
    let mut sorted = samples.to_vec();
    // Closest first: highest piezo voltage.
    sorted.sort_by(|a, b| b.v_pzt.total_cmp(&a.v_pzt));
    let last = n - opts.min_retained;
    let mut levels: Vec<usize> = (0..=last).step_by(opts.stride).collect();
    if levels.last() != Some(&last) {
        levels.push(last);
    }
    levels
        .par_iter()
        .map(|&k| {
            let kept = &sorted[k..];
            let data = curvature_data(kept);
            let (free, sf) = fit(&data, QSpec::Free, opts.offset)?;
            let (fixed, sx) = fit(&data, QSpec::Fixed(2.5), opts.offset)?;
            let dof_free = kept.len() - n_free(QSpec::Free, opts.offset);
            let dof_fixed = kept.len() - n_free(QSpec::Fixed(2.5), opts.offset);
            Ok(TruncationRow {
                removed: k,
                retained: kept.len(),
                v_pzt_closest: kept[0].v_pzt,
                nominal_distance: beta * (fixed.x0 - kept[0].v_pzt),
                q: free.q,
                sigma_q: sf.q,
                gamma_free: free.gamma,
                sigma_gamma_free: sf.gamma,
                v0_pzt_free: free.x0,
                sigma_v0_pzt_free: sf.x0,
                reduced_chi2_free: free.chi2 / dof_free as f64,
                gamma_fixed: fixed.gamma,
                sigma_gamma_fixed: sx.gamma,
                v0_pzt_fixed: fixed.x0,
                sigma_v0_pzt_fixed: sx.x0,
                reduced_chi2_fixed: fixed.chi2 / dof_fixed as f64,
            })
        })
        .collect()
}

/// One level of a fast-approach truncation: the `removed` closest points of a
/// constant-bias approach are dropped and the rest refitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachTruncationRow {
    pub removed: usize,
    pub retained: usize,
    pub v_pzt_closest: f64,
    pub q: f64,
    pub sigma_q: f64,
    pub amplitude: f64,
    pub sigma_amplitude: f64,
    pub v0_pzt: f64,
    pub sigma_v0_pzt: f64,
    pub reduced_chi2: f64,
}

/// Refit a single-bias approach after removing each count in `removals` of
/// its closest points.
pub fn fast_approach_truncation(
    points: &[CalibrationPoint],
    q: QSpec,
    removals: &[usize],
) -> Result<Vec<ApproachTruncationRow>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.v_pzt.total_cmp(&a.v_pzt));
    removals
        .par_iter()
        .map(|&k| {
            let kept = sorted.get(k..).unwrap_or(&[]);
            if kept.len() < 6 {
                return Err(Error::InsufficientData(format!(
                    "removing {k} of {} points leaves fewer than 6",
                    sorted.len()
                )));
            }
            let r = fit_fast_approach(kept, q)?;
            Ok(ApproachTruncationRow {
                removed: k,
                retained: kept.len(),
                v_pzt_closest: kept[0].v_pzt,
                q: r.param(names::Q),
                sigma_q: r.sigma(names::Q),
                amplitude: r.param(names::AMPLITUDE),
                sigma_amplitude: r.sigma(names::AMPLITUDE),
                v0_pzt: r.param(names::V0_PZT),
                sigma_v0_pzt: r.sigma(names::V0_PZT),
                reduced_chi2: r.reduced_chi2,
            })
        })
        .collect()
}
