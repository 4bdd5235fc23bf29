//! Seedable synthetic calibration data.
//!
//! A [`Scenario`] fixes the physics (force model, minimizing-potential profile)
//! and the noise. Generators walk a grid of piezo voltages in the order given
//! and emit [`CalibrationPoint`]s with consecutive timestamps, so that drifts
//! act along the acquisition sequence.
//!
//! Random numbers come from ChaCha8 seeded with `NoiseModel::seed`; a dataset
//! is bit-identical on every platform for a given seed. All draws are made
//! regardless of whether the corresponding amplitude is zero, so changing one
//! amplitude never reshuffles the other noise sources.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::fitting::CurvatureSample;
use crate::models::{curvature_coefficient, Cylinder, Resonator};

/// Linear piezo actuation `d = β (V0_PZT − V_PZT)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiezoMap {
    /// Actuation coefficient β (m/V).
    pub beta: f64,
    /// Piezo voltage at contact (V).
    pub v0_pzt: f64,
}

impl PiezoMap {
    pub fn new(beta: f64, v0_pzt: f64) -> Result<Self> {
        ensure_positive("actuation coefficient beta", beta)?;
        if !v0_pzt.is_finite() {
            return Err(Error::Domain {
                quantity: "contact piezo voltage",
                requirement: "finite",
                value: v0_pzt,
            });
        }
        Ok(Self { beta, v0_pzt })
    }

    pub fn gap(&self, v_pzt: f64) -> Result<f64> {
        piezo_to_gap(self, v_pzt)
    }

    /// Piezo voltage that produces gap `d`.
    pub fn piezo_for_gap(&self, d: f64) -> Result<f64> {
        ensure_positive("gap", d)?;
        Ok(self.v0_pzt - d / self.beta)
    }
}

pub fn piezo_to_gap(map: &PiezoMap, v_pzt: f64) -> Result<f64> {
    if v_pzt >= map.v0_pzt {
        return Err(Error::Contact {
            v_pzt,
            v0_pzt: map.v0_pzt,
        });
    }
    Ok(map.beta * (map.v0_pzt - v_pzt))
}

fn default_length_unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceModel {
    /// PFA Coulomb curvature of the cylinder-plane pair.
    PureCoulomb,
    /// `K(d) = α₁/x^{2.5} + α₂/x^p` with `x = d/length_unit`; `α₁, α₂` in
    /// Hz²/V².
    ExtraPower {
        alpha1: f64,
        alpha2: f64,
        p: f64,
        #[serde(default = "default_length_unit")]
        length_unit: f64,
    },
}

impl ForceModel {
    pub fn validate(&self) -> Result<()> {
        if let ForceModel::ExtraPower {
            alpha1,
            alpha2,
            p,
            length_unit,
        } = *self
        {
            for (q, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Domain {
                        quantity: q,
                        requirement: "nonnegative and finite",
                        value: v,
                    });
                }
            }
            if !(p > 2.5) || !p.is_finite() {
                return Err(Error::Domain {
                    quantity: "extra-force exponent p",
                    requirement: "finite and above 2.5",
                    value: p,
                });
            }
            ensure_positive("length unit", length_unit)?;
        }
        Ok(())
    }
}

/// `Δν² = −(α₁/d^{2.5} + α₂/d^p)·dv²` with `d` in the units of `α₁, α₂`.
pub fn hypothetical_shift(alpha1: f64, alpha2: f64, p: f64, d: f64, dv: f64) -> Result<f64> {
    ensure_positive("gap", d)?;
    if !(p > 2.5) {
        return Err(Error::Domain {
            quantity: "extra-force exponent p",
            requirement: "above 2.5",
            value: p,
        });
    }
    Ok(-(alpha1 / d.powf(2.5) + alpha2 / d.powf(p)) * dv * dv)
}

/// Distance dependence of the minimizing potential `V₀(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum V0Profile {
    Constant { v0: f64 },
    /// `V₀ = v0_far + slope·(d − d_far)`.
    Linear { v0_far: f64, slope: f64, d_far: f64 },
    /// `V₀ = v0_near + (v0_far − v0_near)·x²/(1 + x²)`, `x = d/d_knee`: flat
    /// near contact, tending to `v0_far` at large gaps.
    Saturating {
        v0_far: f64,
        v0_near: f64,
        d_knee: f64,
    },
}

impl V0Profile {
    pub fn at(&self, d: f64) -> f64 {
        match *self {
            V0Profile::Constant { v0 } => v0,
            V0Profile::Linear {
                v0_far,
                slope,
                d_far,
            } => v0_far + slope * (d - d_far),
            V0Profile::Saturating {
                v0_far,
                v0_near,
                d_knee,
            } => {
                let x = d / d_knee;
                let s = x * x / (1.0 + x * x);
                v0_near + (v0_far - v0_near) * s
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let V0Profile::Saturating { d_knee, .. } = *self {
            ensure_positive("knee distance", d_knee)?;
        }
        Ok(())
    }
}

fn default_true() -> bool {
    true
}

fn default_period() -> f64 {
    100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-point frequency uncertainty (Hz), recorded in every point.
    pub sigma_nu: f64,
    /// Uncertainty of curvature pseudo-data (Hz²/V²).
    #[serde(default)]
    pub sigma_k: f64,
    /// Fractional amplitude of the sinusoidal drift of the curvature.
    #[serde(default)]
    pub kel_drift_frac: f64,
    /// Drift period in timestamps.
    #[serde(default = "default_period")]
    pub kel_drift_period: f64,
    /// Standard deviation of the minimizing potential, redrawn at each piezo
    /// step (V).
    #[serde(default)]
    pub v0_sigma: f64,
    /// Total linear ramp of `ν₀` over a run (Hz).
    #[serde(default)]
    pub nu0_drift: f64,
    pub seed: u64,
    /// When false, `sigma_nu`/`sigma_k` are recorded but no Gaussian noise is
    /// added.
    #[serde(default = "default_true")]
    pub inject: bool,
}

impl NoiseModel {
    pub fn quiet(sigma_nu: f64) -> Self {
        Self {
            sigma_nu,
            sigma_k: 0.0,
            kel_drift_frac: 0.0,
            kel_drift_period: default_period(),
            v0_sigma: 0.0,
            nu0_drift: 0.0,
            seed: 0,
            inject: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (q, v) in [
            ("sigma_nu", self.sigma_nu),
            ("sigma_k", self.sigma_k),
            ("kel_drift_frac", self.kel_drift_frac),
            ("v0_sigma", self.v0_sigma),
            ("nu0_drift", self.nu0_drift),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain {
                    quantity: q,
                    requirement: "nonnegative and finite",
                    value: v,
                });
            }
        }
        ensure_positive("kel_drift_period", self.kel_drift_period)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cylinder: Cylinder,
    pub resonator: Resonator,
    pub force: ForceModel,
    pub v0_profile: V0Profile,
    pub noise: NoiseModel,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.force.validate()?;
        self.v0_profile.validate()?;
        self.noise.validate()
    }

    /// Noise-free curvature `K(d)` such that `Δν² = −K(d)(V − V₀)²`.
    pub fn curvature(&self, d: f64) -> Result<f64> {
        match self.force {
            ForceModel::PureCoulomb => curvature_coefficient(&self.cylinder, &self.resonator, d),
            ForceModel::ExtraPower {
                alpha1,
                alpha2,
                p,
                length_unit,
            } => Ok(-hypothetical_shift(alpha1, alpha2, p, d / length_unit, 1.0)?),
        }
    }

    /// Noise-free `ν²` at gap `d` and bias `v`.
    pub fn nu_sq(&self, d: f64, v: f64) -> Result<f64> {
        let dv = v - self.v0_profile.at(d);
        Ok(self.resonator.nu0.powi(2) - self.curvature(d)? * dv * dv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub run_id: u32,
    pub timestamp: u64,
    pub v_pzt: f64,
    pub v_bias: f64,
    pub nu: f64,
    pub sigma_nu: f64,
}

struct Sampler<'a> {
    scenario: &'a Scenario,
    rng: ChaCha8Rng,
    total: u64,
}

impl Sampler<'_> {
    fn gauss(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn point(&mut self, run_id: u32, t: u64, v_pzt: f64, d: f64, v: f64, v0: f64) -> Result<CalibrationPoint> {
        let s = self.scenario;
        let n = &s.noise;
        let drift = 1.0 + n.kel_drift_frac * (2.0 * PI * t as f64 / n.kel_drift_period).sin();
        let ramp = if self.total > 1 {
            t as f64 / (self.total - 1) as f64
        } else {
            0.0
        };
        let nu0 = s.resonator.nu0 + n.nu0_drift * ramp;
        let dv = v - v0;
        let nu_sq = nu0 * nu0 - drift * s.curvature(d)? * dv * dv;
        if !(nu_sq > 0.0) {
            return Err(Error::Domain {
                quantity: "squared resonance frequency",
                requirement: "positive (raise nu0 or reduce the bias)",
                value: nu_sq,
            });
        }
        let z = self.gauss();
        let noise = if n.inject { n.sigma_nu * z } else { 0.0 };
        Ok(CalibrationPoint {
            run_id,
            timestamp: t,
            v_pzt,
            v_bias: v,
            nu: nu_sq.sqrt() + noise,
            sigma_nu: n.sigma_nu,
        })
    }
}

fn sampler(scenario: &Scenario, total: usize) -> Result<Sampler<'_>> {
    scenario.validate()?;
    Ok(Sampler {
        scenario,
        rng: ChaCha8Rng::seed_from_u64(scenario.noise.seed),
        total: total as u64,
    })
}

/// Curvature-technique run: at each piezo voltage (in the given order) the
/// bias is swept through `v_bias` (in the given order).
pub fn generate_calibration_run(
    scenario: &Scenario,
    map: &PiezoMap,
    run_id: u32,
    v_pzt: &[f64],
    v_bias: &[f64],
) -> Result<Vec<CalibrationPoint>> {
    let mut s = sampler(scenario, v_pzt.len() * v_bias.len())?;
    let mut out = Vec::with_capacity(v_pzt.len() * v_bias.len());
    let mut t = 0;
    for &vp in v_pzt {
        let d = map.gap(vp)?;
        let v0 = scenario.v0_profile.at(d) + scenario.noise.v0_sigma * s.gauss();
        for &vb in v_bias {
            out.push(s.point(run_id, t, vp, d, vb, v0)?);
            t += 1;
        }
    }
    Ok(out)
}

/// Fast-approach run: the gap is stepped through `v_pzt` while the bias is
/// held constant. Several biases are interleaved at each step.
pub fn generate_fast_approach_run(
    scenario: &Scenario,
    map: &PiezoMap,
    run_id: u32,
    v_pzt: &[f64],
    v_bias: &[f64],
) -> Result<Vec<CalibrationPoint>> {
    generate_calibration_run(scenario, map, run_id, v_pzt, v_bias)
}

/// Curvature pseudo-data `K(d)` with absolute uncertainty `noise.sigma_k`,
/// bypassing the frequency measurement.
pub fn curvature_pseudo_data(
    scenario: &Scenario,
    map: &PiezoMap,
    v_pzt: &[f64],
) -> Result<Vec<CurvatureSample>> {
    let mut s = sampler(scenario, v_pzt.len())?;
    let n = scenario.noise;
    ensure_positive("sigma_k", n.sigma_k)?;
    let nu0_sq = scenario.resonator.nu0.powi(2);
    let mut out = Vec::with_capacity(v_pzt.len());
    for (t, &vp) in v_pzt.iter().enumerate() {
        let d = map.gap(vp)?;
        let drift = 1.0 + n.kel_drift_frac * (2.0 * PI * t as f64 / n.kel_drift_period).sin();
        let zk = s.gauss();
        let zv = s.gauss();
        let (dk, dv0) = if n.inject {
            (n.sigma_k * zk, n.v0_sigma * zv)
        } else {
            (0.0, 0.0)
        };
        out.push(CurvatureSample {
            v_pzt: vp,
            k_el: drift * scenario.curvature(d)? + dk,
            sigma_k: n.sigma_k,
            v0: scenario.v0_profile.at(d) + dv0,
            sigma_v0: n.v0_sigma,
            nu0_sq,
        });
    }
    Ok(out)
}
