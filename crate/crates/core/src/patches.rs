//! Patch-potential interaction for an isotropic random surface potential with
//! power spectral density `S(k)` (V²·m), normalized so that
//! `V_rms² = ∫₀^∞ k S(k) dk`.
//!
//! `patch_energy_pp` is an energy per unit area of two parallel planes.
//! `patch_force_cp` is the PFA force on a cylinder of physical length `L`.
//! Neither depends on the applied bias.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::EPSILON_0;
use crate::error::{ensure_positive, Error, Result};
use crate::models::{coulomb_force_cylinder_pfa, Cylinder};
use crate::quad::{integrate, Estimate, Tolerance};

/// Below this `k·d` the integrands are replaced by their leading behaviour.
const SMALL_KD: f64 = 1e-8;
/// Gaussian bands are integrated over `k_center ± GAUSS_SPAN·k_width`.
const GAUSS_SPAN: f64 = 12.0;
const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchSpectrum {
    /// `S(k) = amplitude` on `[k_min, k_max]`, zero elsewhere.
    FlatBand { k_min: f64, k_max: f64, amplitude: f64 },
    /// `S(k) = amplitude·exp(−(k − k_center)²/(2 k_width²))`.
    GaussianBand {
        k_center: f64,
        k_width: f64,
        amplitude: f64,
    },
    /// Piecewise-linear interpolation of `(k, S)` nodes, zero outside.
    Tabulated { table: Vec<(f64, f64)> },
}

impl PatchSpectrum {
    pub fn flat_band(k_min: f64, k_max: f64, amplitude: f64) -> Result<Self> {
        let s = PatchSpectrum::FlatBand {
            k_min,
            k_max,
            amplitude,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian_band(k_center: f64, k_width: f64, amplitude: f64) -> Result<Self> {
        let s = PatchSpectrum::GaussianBand {
            k_center,
            k_width,
            amplitude,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        let s = PatchSpectrum::Tabulated { table };
        s.validate()?;
        Ok(s)
    }

    /// Read a two-column `k S` text table; blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_table(&text)
    }

    pub fn parse_table(text: &str) -> Result<Self> {
        let mut table = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!(
                    "spectrum line {}: expected 2 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("spectrum line {}: `{s}`: {e}", lineno + 1))
                })
            };
            table.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::tabulated(table)
    }

    pub fn validate(&self) -> Result<()> {
        let domain = |quantity, requirement, value| {
            Err(Error::Domain {
                quantity,
                requirement,
                value,
            })
        };
        match self {
            PatchSpectrum::FlatBand {
                k_min,
                k_max,
                amplitude,
            } => {
                if !(*k_min >= 0.0) {
                    return domain("k_min", "nonnegative", *k_min);
                }
                if !(k_max > k_min) || !k_max.is_finite() {
                    return domain("k_max", "finite and above k_min", *k_max);
                }
                if !(*amplitude >= 0.0) || !amplitude.is_finite() {
                    return domain("spectral amplitude", "nonnegative and finite", *amplitude);
                }
            }
            PatchSpectrum::GaussianBand {
                k_center,
                k_width,
                amplitude,
            } => {
                if !(*k_center >= 0.0) || !k_center.is_finite() {
                    return domain("k_center", "nonnegative and finite", *k_center);
                }
                ensure_positive("k_width", *k_width)?;
                if !(*amplitude >= 0.0) || !amplitude.is_finite() {
                    return domain("spectral amplitude", "nonnegative and finite", *amplitude);
                }
            }
            PatchSpectrum::Tabulated { table } => {
                if table.len() < 2 {
                    return Err(Error::InsufficientData(
                        "a tabulated spectrum needs at least 2 nodes".into(),
                    ));
                }
                for (i, &(k, s)) in table.iter().enumerate() {
                    if !(k >= 0.0) || !k.is_finite() {
                        return domain("tabulated k", "nonnegative and finite", k);
                    }
                    if !(s >= 0.0) || !s.is_finite() {
                        return domain("tabulated S(k)", "nonnegative and finite", s);
                    }
                    if i > 0 && k <= table[i - 1].0 {
                        return domain("tabulated k", "strictly increasing", k);
                    }
                }
            }
        }
        Ok(())
    }

    /// Spectral density at wavenumber `k`.
    pub fn density(&self, k: f64) -> f64 {
        match self {
            PatchSpectrum::FlatBand {
                k_min,
                k_max,
                amplitude,
            } => {
                if k >= *k_min && k <= *k_max {
                    *amplitude
                } else {
                    0.0
                }
            }
            PatchSpectrum::GaussianBand {
                k_center,
                k_width,
                amplitude,
            } => {
                let z = (k - k_center) / k_width;
                amplitude * (-0.5 * z * z).exp()
            }
            PatchSpectrum::Tabulated { table } => {
                let first = table[0].0;
                let last = table[table.len() - 1].0;
                if k < first || k > last {
                    return 0.0;
                }
                let i = table.partition_point(|&(kk, _)| kk <= k).clamp(1, table.len() - 1);
                let (k0, s0) = table[i - 1];
                let (k1, s1) = table[i];
                s0 + (s1 - s0) * (k - k0) / (k1 - k0)
            }
        }
    }

    /// Breakpoints of the support, in increasing order. Quadrature runs
    /// separately on each consecutive pair.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            PatchSpectrum::FlatBand { k_min, k_max, .. } => vec![*k_min, *k_max],
            PatchSpectrum::GaussianBand {
                k_center, k_width, ..
            } => vec![
                (k_center - GAUSS_SPAN * k_width).max(0.0),
                *k_center,
                k_center + GAUSS_SPAN * k_width,
            ]
            .into_iter()
            .fold(Vec::new(), |mut acc, k| {
                if acc.last().is_none_or(|&l| k > l) {
                    acc.push(k);
                }
                acc
            }),
            PatchSpectrum::Tabulated { table } => table.iter().map(|&(k, _)| k).collect(),
        }
    }

    fn peak_density(&self) -> f64 {
        match self {
            PatchSpectrum::FlatBand { amplitude, .. } => *amplitude,
            PatchSpectrum::GaussianBand { amplitude, .. } => *amplitude,
            PatchSpectrum::Tabulated { table } => {
                table.iter().map(|&(_, s)| s).fold(0.0, f64::max)
            }
        }
    }

    fn k_upper(&self) -> f64 {
        *self.breakpoints().last().expect("spectrum has support")
    }
}

/// Integrate `g(k)·S(k)` over the support of `spec`, clipped at `k_cut`.
fn integrate_weighted<G: Fn(f64) -> f64>(
    spec: &PatchSpectrum,
    g: G,
    k_cut: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    spec.validate()?;
    let points = spec.breakpoints();
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    // Per-piece tolerances are relative, so the summed error stays within
    // the same relative bound of the (nonnegative) total.
    for pair in points.windows(2) {
        let lo = pair[0];
        let hi = pair[1].min(k_cut);
        if hi <= lo {
            break;
        }
        let piece = integrate(|k| g(k) * spec.density(k), lo, hi, tol, MAX_SEGMENTS)?;
        total.value += piece.value;
        total.error += piece.error;
        total.evaluations += piece.evaluations;
    }
    Ok(total)
}

/// `∫_c^∞ kⁿ e^{−λk} dk` for `n ∈ {2, 3}`.
fn exp_tail(n: u32, c: f64, lambda: f64) -> f64 {
    let e = (-lambda * c).exp();
    match n {
        2 => e * (c * c / lambda + 2.0 * c / lambda.powi(2) + 2.0 / lambda.powi(3)),
        3 => {
            e * (c.powi(3) / lambda
                + 3.0 * c * c / lambda.powi(2)
                + 6.0 * c / lambda.powi(3)
                + 6.0 / lambda.powi(4))
        }
        _ => unreachable!("tail bound only used for n = 2, 3"),
    }
}

fn k_cut(spec: &PatchSpectrum, d: f64) -> f64 {
    (50.0 / d).max(10.0 * spec.k_upper())
}

/// `V_rms = √(∫ k S(k) dk)`; closed form for flat bands.
pub fn v_rms(spec: &PatchSpectrum) -> Result<f64> {
    spec.validate()?;
    if let PatchSpectrum::FlatBand {
        k_min,
        k_max,
        amplitude,
    } = spec
    {
        return Ok((amplitude * (k_max * k_max - k_min * k_min) / 2.0).sqrt());
    }
    let est = integrate_weighted(spec, |k| k, f64::INFINITY, Tolerance::default())?;
    Ok(est.value.max(0.0).sqrt())
}

/// Plane-plane patch energy per unit area (J/m²),
/// `(ε₀/2) ∫ k² e^{−kd}/sinh(kd) S(k) dk`.
pub fn patch_energy_pp(spec: &PatchSpectrum, d: f64) -> Result<f64> {
    Ok(patch_energy_pp_estimate(spec, d, Tolerance::default())?.value)
}

/// As [`patch_energy_pp`], with the quadrature error estimate (including the
/// bound on the neglected tail).
pub fn patch_energy_pp_estimate(spec: &PatchSpectrum, d: f64, tol: Tolerance) -> Result<Estimate> {
    ensure_positive("gap", d)?;
    let integrand = |k: f64| {
        let kd = k * d;
        if kd < SMALL_KD {
            k / d
        } else {
            2.0 * k * k / (2.0 * kd).exp_m1()
        }
    };
    let cut = k_cut(spec, d);
    let mut est = integrate_weighted(spec, integrand, cut, tol)?;
    if spec.k_upper() > cut {
        // k²·2e^{−2kd}/(1 − e^{−2kd}) ≤ 2.000001·k² e^{−2kd} for kd ≥ 50.
        est.error += 2.000001 * spec.peak_density() * exp_tail(2, cut, 2.0 * d);
    }
    let scale = EPSILON_0 / 2.0;
    est.value *= scale;
    est.error *= scale;
    Ok(est)
}

/// PFA patch force on a cylinder (N),
/// `(πε₀L/2√2)·√(ad)·∫ k³ e^{−2kd}/sinh²(kd) S(k) dk`.
pub fn patch_force_cp(spec: &PatchSpectrum, cylinder: &Cylinder, d: f64) -> Result<f64> {
    Ok(patch_force_cp_estimate(spec, cylinder, d, Tolerance::default())?.value)
}

/// As [`patch_force_cp`], with the quadrature error estimate.
pub fn patch_force_cp_estimate(
    spec: &PatchSpectrum,
    cylinder: &Cylinder,
    d: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    ensure_positive("gap", d)?;
    let integrand = |k: f64| {
        let kd = k * d;
        if kd < SMALL_KD {
            k / (d * d)
        } else {
            let m = (2.0 * kd).exp_m1();
            4.0 * k * k * k / (m * m)
        }
    };
    let cut = k_cut(spec, d);
    let mut est = integrate_weighted(spec, integrand, cut, tol)?;
    if spec.k_upper() > cut {
        est.error += 4.000001 * spec.peak_density() * exp_tail(3, cut, 4.0 * d);
    }
    let scale = PI * EPSILON_0 * cylinder.length / (2.0 * SQRT_2) * (cylinder.radius * d).sqrt();
    est.value *= scale;
    est.error *= scale;
    Ok(est)
}

/// Large-patch limit: the PFA Coulomb force with `V → V_rms`, using the
/// physical length `L`.
pub fn patch_force_cp_large_limit(cylinder: &Cylinder, d: f64, v_rms: f64) -> Result<f64> {
    coulomb_force_cylinder_pfa(cylinder, d, v_rms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lens() -> Cylinder {
        Cylinder::new(12e-3, 4e-3, 2e-3).unwrap()
    }

    #[test]
    fn flat_band_rms_closed_form() {
        let s = PatchSpectrum::flat_band(1e5, 3e5, 2e-12).unwrap();
        assert_relative_eq!(
            v_rms(&s).unwrap(),
            (2e-12 * (9e10 - 1e10) / 2.0f64).sqrt(),
            max_relative = 1e-15
        );
        let zero = PatchSpectrum::flat_band(1e5, 3e5, 0.0).unwrap();
        assert_eq!(v_rms(&zero).unwrap(), 0.0);
        assert_eq!(patch_energy_pp(&zero, 1e-6).unwrap(), 0.0);
        assert_eq!(patch_force_cp(&zero, &lens(), 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_rms_matches_flat_equivalent_for_narrow_band() {
        // ∫ k A e^{−(k−kc)²/2w²} dk ≈ A·kc·w√(2π) when kc ≫ w.
        let (kc, w, a) = (1e6, 1e3, 1e-12);
        let s = PatchSpectrum::gaussian_band(kc, w, a).unwrap();
        let expected = (a * kc * w * (2.0 * PI).sqrt()).sqrt();
        assert_relative_eq!(v_rms(&s).unwrap(), expected, max_relative = 1e-8);
    }

    #[test]
    fn tabulated_interpolation_and_loader() {
        let s = PatchSpectrum::parse_table("# k S\n1 2\n\n3 6\n4 0\n").unwrap();
        assert_eq!(s.density(0.5), 0.0);
        assert_eq!(s.density(2.0), 4.0);
        assert_eq!(s.density(3.5), 3.0);
        assert_eq!(s.density(4.5), 0.0);
        assert!(PatchSpectrum::parse_table("1 2\n1 3\n").is_err());
        assert!(PatchSpectrum::parse_table("1 2 3\n").is_err());
        assert!(PatchSpectrum::parse_table("1 -2\n2 1\n").is_err());
    }

    #[test]
    fn tabulated_rms_matches_trapezoid_oracle() {
        let table: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let k = 1e4 * (1.0 + i as f64);
                (k, 1e-12 * (1.0 + (i as f64 * 0.7).sin().abs()))
            })
            .collect();
        let s = PatchSpectrum::tabulated(table.clone()).unwrap();
        // Trapezoid rule on k·S(k) with 2000 sub-steps per node interval.
        let mut oracle = 0.0;
        for w in table.windows(2) {
            let n = 2000;
            let h = (w[1].0 - w[0].0) / n as f64;
            for j in 0..n {
                let k0 = w[0].0 + h * j as f64;
                let k1 = k0 + h;
                let lerp = |k: f64| w[0].1 + (w[1].1 - w[0].1) * (k - w[0].0) / (w[1].0 - w[0].0);
                oracle += 0.5 * h * (k0 * lerp(k0) + k1 * lerp(k1));
            }
        }
        assert_relative_eq!(v_rms(&s).unwrap(), oracle.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn narrow_band_matches_single_mode() {
        let d = 1e-6;
        let k0 = 5.0 / d;
        let eps = 1e-5;
        let amp = 3e-12;
        let s = PatchSpectrum::flat_band(k0 * (1.0 - eps), k0 * (1.0 + eps), amp).unwrap();
        let weight = amp * 2.0 * eps * k0;
        let kd: f64 = k0 * d;
        let u = EPSILON_0 / 2.0 * k0 * k0 * (-kd).exp() / kd.sinh() * weight;
        assert_relative_eq!(patch_energy_pp(&s, d).unwrap(), u, max_relative = 1e-8);
        let cyl = lens();
        let f = PI * EPSILON_0 * cyl.length / (2.0 * SQRT_2)
            * (cyl.radius * d).sqrt()
            * k0.powi(3)
            * (-2.0 * kd).exp()
            / kd.sinh().powi(2)
            * weight;
        assert_relative_eq!(patch_force_cp(&s, &cyl, d).unwrap(), f, max_relative = 1e-8);
    }

    #[test]
    fn energy_decreases_with_gap() {
        let s = PatchSpectrum::flat_band(0.0, 1e7, 1e-14).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let d = 1e-8 * 1.5f64.powi(i);
            let u = patch_energy_pp(&s, d).unwrap();
            assert!(u < last, "U_pp not decreasing at d = {d}");
            last = u;
        }
    }

    #[test]
    fn large_and_small_patch_limits() {
        let d = 1e-6;
        let cyl = lens();
        let large = PatchSpectrum::flat_band(0.0, 1e-3 / d, 1.0).unwrap();
        let vr = v_rms(&large).unwrap();
        let ratio = patch_force_cp(&large, &cyl, d).unwrap()
            / patch_force_cp_large_limit(&cyl, d, vr).unwrap();
        assert!((ratio - 1.0).abs() < 5e-3, "ratio {ratio}");

        let small = PatchSpectrum::flat_band(10.0 / d, 20.0 / d, 1.0).unwrap();
        let vs = v_rms(&small).unwrap();
        let ratio = patch_force_cp(&small, &cyl, d).unwrap()
            / patch_force_cp_large_limit(&cyl, d, vs).unwrap();
        assert!(ratio < 1e-6 && ratio > 0.0, "ratio {ratio}");
    }

    #[test]
    fn large_limit_is_pfa_coulomb_with_full_length() {
        let cyl = lens();
        let f = patch_force_cp_large_limit(&cyl, 1e-6, 0.02).unwrap();
        assert_eq!(f, coulomb_force_cylinder_pfa(&cyl, 1e-6, 0.02).unwrap());
        assert_relative_eq!(
            f / patch_force_cp_large_limit(&cyl, 4e-6, 0.02).unwrap(),
            8.0,
            max_relative = 1e-14
        );
        assert_eq!(patch_force_cp_large_limit(&cyl, 1e-6, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ratio_to_large_limit_is_monotone_in_band_position() {
        let d = 1e-6;
        let cyl = lens();
        let mut last = f64::INFINITY;
        for i in 0..9 {
            let kd = 1e-3 * 3f64.powi(i);
            let s = PatchSpectrum::flat_band(kd / d, 2.0 * kd / d, 1.0).unwrap();
            let ratio = patch_force_cp(&s, &cyl, d).unwrap()
                / patch_force_cp_large_limit(&cyl, d, v_rms(&s).unwrap()).unwrap();
            assert!(ratio < last && ratio <= 1.0, "kd {kd}: ratio {ratio}");
            last = ratio;
        }
    }

    #[test]
    fn tightening_tolerance_stays_within_error_estimate() {
        let d = 2e-6;
        let cyl = lens();
        for s in [
            PatchSpectrum::flat_band(0.0, 5e7, 1e-14).unwrap(),
            PatchSpectrum::gaussian_band(2e6, 5e5, 1e-13).unwrap(),
        ] {
            let coarse = Tolerance {
                absolute: 0.0,
                relative: 1e-6,
            };
            let fine = Tolerance {
                absolute: 0.0,
                relative: 5e-7,
            };
            let a = patch_force_cp_estimate(&s, &cyl, d, coarse).unwrap();
            let b = patch_force_cp_estimate(&s, &cyl, d, fine).unwrap();
            assert!((a.value - b.value).abs() <= a.error, "{s:?}");
            let a = patch_energy_pp_estimate(&s, d, coarse).unwrap();
            let b = patch_energy_pp_estimate(&s, d, fine).unwrap();
            assert!((a.value - b.value).abs() <= a.error, "{s:?}");
        }
    }

    #[test]
    fn rejects_invalid_spectra() {
        assert!(PatchSpectrum::flat_band(2.0, 1.0, 1.0).is_err());
        assert!(PatchSpectrum::flat_band(0.0, 1.0, -1.0).is_err());
        assert!(PatchSpectrum::gaussian_band(1.0, 0.0, 1.0).is_err());
        let s = PatchSpectrum::flat_band(0.0, 1.0, 1.0).unwrap();
        assert_eq!(patch_energy_pp(&s, 0.0).unwrap_err().class(), "domain");
    }
}
