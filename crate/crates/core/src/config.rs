//! Declarative scenario files (TOML).
//!
//! Every section is optional at parse time; each command asks for the
//! sections it needs through the accessors on [`Config`]. Unknown keys are
//! rejected, and all errors name the offending key, e.g.
//! `scenario.force[1].p`.
//!
//! ```toml
//! [geometry]
//! radius = 12e-3
//! length = 4e-3
//!
//! [piezo]
//! beta = 91.9e-9
//! v0_pzt = 79.52
//!
//! [grid]
//! v_pzt = { start = 30.0, stop = 75.0, step = 1.0 }
//! v_bias = [-0.4, -0.2, 0.0, 0.2, 0.4]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deformations::Deformation;
use crate::error::{Error, Result};
use crate::fitting::{QSpec, TruncationOptions};
use crate::models::{Cylinder, Resonator};
use crate::patches::PatchSpectrum;
use crate::synth::{ForceModel, NoiseModel, PiezoMap, Scenario, V0Profile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: Option<GeometrySection>,
    pub resonator: Option<ResonatorSection>,
    pub piezo: Option<PiezoSection>,
    pub scenario: Option<ScenarioSection>,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub deformation: Option<DeformationSection>,
    pub patches: Option<PatchesSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Cylinder radius `a` (m).
    pub radius: f64,
    /// Cylinder length `L` (m).
    pub length: f64,
    /// Length facing the plate, `L_eff` (m); defaults to `length`.
    pub effective_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    /// kg
    pub effective_mass: f64,
    /// Hz
    pub nu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiezoSection {
    /// m/V
    pub beta: f64,
    /// Contact piezo voltage (V).
    pub v0_pzt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Bias sweeps at each piezo voltage.
    Curvature,
    /// Constant-bias approaches, biases interleaved at each step.
    FastApproach,
    /// Curvature samples drawn directly from the model.
    CurvaturePseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    /// One generated run per entry.
    #[serde(rename = "force")]
    pub forces: Vec<ForceModel>,
    pub v0_profile: V0Profile,
    pub noise: NoiseModel,
}

/// A list of values or an arithmetic or geometric progression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Step(StepAxis),
    Count(CountAxis),
}

/// `start, start + step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// `n` points from `start` to `stop`, linearly or logarithmically spaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountAxis {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

const MAX_AXIS_POINTS: usize = 1_000_000;

/// Round to 12 significant digits so that `0.5 + 7 × 0.01` reads as `0.57`.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl Axis {
    pub fn values(&self, path: &str) -> Result<Vec<f64>> {
        let out = match *self {
            Axis::List(ref v) => v.clone(),
            Axis::Step(StepAxis { start, stop, step }) => {
                if !(step != 0.0) || !step.is_finite() || (stop - start) * step < 0.0 {
                    return Err(Error::config(
                        format!("{path}.step"),
                        format!("step {step} does not lead from {start} to {stop}"),
                    ));
                }
                let span = (stop - start) / step;
                if !(span < MAX_AXIS_POINTS as f64) {
                    return Err(Error::config(path, "too many points"));
                }
                let n = (span + 1e-9).floor() as usize + 1;
                (0..n).map(|i| tidy(start + i as f64 * step)).collect()
            }
            Axis::Count(CountAxis { start, stop, n, log }) => {
                if !(2..=MAX_AXIS_POINTS).contains(&n) {
                    return Err(Error::config(
                        format!("{path}.n"),
                        format!("needs between 2 and {MAX_AXIS_POINTS} points, got {n}"),
                    ));
                }
                if log && !(start > 0.0 && stop > 0.0) {
                    return Err(Error::config(path, "log spacing needs positive bounds"));
                }
                (0..n)
                    .map(|i| {
                        let t = i as f64 / (n - 1) as f64;
                        tidy(if log {
                            (start.ln() + t * (stop.ln() - start.ln())).exp()
                        } else {
                            start + t * (stop - start)
                        })
                    })
                    .collect()
            }
        };
        if out.is_empty() {
            return Err(Error::config(path, "no values"));
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("{path}[{i}]"), "not finite"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Piezo voltages (V); exclusive with `gap`.
    pub v_pzt: Option<Axis>,
    /// Gaps (m), converted through the piezo map; exclusive with `v_pzt`.
    pub gap: Option<Axis>,
    /// Bias voltages (V).
    pub v_bias: Option<Axis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeTag {
    Free,
}

/// `q = "free"` or `q = 2.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QChoice {
    Fixed(f64),
    Named(FreeTag),
}

impl Default for QChoice {
    fn default() -> Self {
        QChoice::Named(FreeTag::Free)
    }
}

impl From<QChoice> for QSpec {
    fn from(q: QChoice) -> Self {
        match q {
            QChoice::Fixed(v) => QSpec::Fixed(v),
            QChoice::Named(FreeTag::Free) => QSpec::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for QGrid {
    fn default() -> Self {
        Self {
            min: 0.5,
            max: 4.0,
            step: 0.01,
        }
    }
}

impl QGrid {
    pub fn values(&self, path: &str) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max >= self.min && self.step > 0.0) {
            return Err(Error::config(
                path,
                format!(
                    "needs 0 < min <= max and step > 0, got {}:{}:{}",
                    self.min, self.max, self.step
                ),
            ));
        }
        Axis::Step(StepAxis {
            start: self.min,
            stop: self.max,
            step: self.step,
        })
        .values(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Which kind of calibration data `fit`, `scan` and `residuals` read;
    /// defaults to `scenario.kind`.
    pub input: Option<ScenarioKind>,
    #[serde(default)]
    pub q: QChoice,
    #[serde(default)]
    pub offset: bool,
    #[serde(default)]
    pub q_grid: QGrid,
    #[serde(default = "default_min_retained")]
    pub min_retained: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Closest points removed in fast-approach truncations.
    #[serde(default = "default_removals")]
    pub removals: Vec<usize>,
    /// Piezo-voltage window of the far-distance fit in residual analysis.
    pub fit_window: Option<[f64; 2]>,
    /// Piezo-voltage window where residuals are reported.
    pub eval_window: Option<[f64; 2]>,
    /// Minimizing potential used to calibrate the mass from the far fit (V).
    pub residual_v0: Option<f64>,
}

fn default_min_retained() -> usize {
    6
}

fn default_stride() -> usize {
    1
}

fn default_removals() -> Vec<usize> {
    vec![0, 1, 2, 3, 4]
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            input: None,
            q: QChoice::default(),
            offset: false,
            q_grid: QGrid::default(),
            min_retained: default_min_retained(),
            stride: default_stride(),
            removals: default_removals(),
            fit_window: None,
            eval_window: None,
            residual_v0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationSection {
    /// Lower and upper gap of the exponent fit (m).
    #[serde(default = "default_fit_range")]
    pub fit_range: [f64; 2],
    #[serde(default = "default_fit_points")]
    pub n_points: usize,
    #[serde(rename = "case")]
    pub cases: Vec<Deformation>,
}

fn default_fit_range() -> [f64; 2] {
    [0.5e-6, 2e-6]
}

fn default_fit_points() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchesSection {
    pub spectrum: Option<PatchSpectrum>,
    /// Two-column `k (1/m), C(k) (V²·m²)` table, relative to the config file.
    pub table_file: Option<PathBuf>,
    /// Gaps (m).
    pub distances: Axis,
    #[serde(default = "default_patch_tolerance")]
    pub relative_tolerance: f64,
}

fn default_patch_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "run".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            prefix: default_prefix(),
        }
    }
}

fn missing(section: &str) -> Error {
    Error::config(section, "section is required by this command")
}

fn at(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |e| Error::config(path, e.to_string())
}

impl Config {
    /// Parse and validate TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.to_string()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Error::config(path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Check every section that is present.
    pub fn validate(&self) -> Result<()> {
        if self.geometry.is_some() {
            self.cylinder()?;
        }
        if self.resonator.is_some() {
            self.resonator()?;
        }
        if self.piezo.is_some() {
            self.piezo_map()?;
        }
        if let Some(sc) = &self.scenario {
            if sc.forces.is_empty() {
                return Err(Error::config("scenario.force", "at least one entry"));
            }
            for (i, f) in sc.forces.iter().enumerate() {
                f.validate().map_err(at(format!("scenario.force[{i}]")))?;
            }
            sc.v0_profile.validate().map_err(at("scenario.v0_profile"))?;
            sc.noise.validate().map_err(at("scenario.noise"))?;
            if sc.kind == ScenarioKind::CurvaturePseudo && !(sc.noise.sigma_k > 0.0) {
                return Err(Error::config(
                    "scenario.noise.sigma_k",
                    "pseudo-data needs a positive curvature uncertainty",
                ));
            }
        }
        if let Some(g) = &self.grid {
            match (&g.v_pzt, &g.gap) {
                (Some(_), Some(_)) => {
                    return Err(Error::config("grid", "give either `v_pzt` or `gap`, not both"))
                }
                (Some(a), None) => {
                    a.values("grid.v_pzt")?;
                }
                (None, Some(a)) => {
                    if let Some(i) = a.values("grid.gap")?.iter().position(|&d| !(d > 0.0)) {
                        return Err(Error::config(format!("grid.gap[{i}]"), "gaps must be positive"));
                    }
                }
                (None, None) => return Err(Error::config("grid", "missing `v_pzt` or `gap`")),
            }
            if let Some(a) = &g.v_bias {
                a.values("grid.v_bias")?;
            }
        }
        let a = &self.analysis;
        a.q_grid.values("analysis.q_grid")?;
        if let QChoice::Fixed(q) = a.q {
            if !(q > 0.0 && q <= 10.0) {
                return Err(Error::config("analysis.q", format!("fixed exponent {q} outside (0, 10]")));
            }
        }
        if a.min_retained < 6 {
            return Err(Error::config("analysis.min_retained", "at least 6"));
        }
        if a.stride == 0 {
            return Err(Error::config("analysis.stride", "at least 1"));
        }
        for (name, w) in [("fit_window", a.fit_window), ("eval_window", a.eval_window)] {
            if let Some(w) = w {
                if !(w[0].is_finite() && w[1].is_finite() && w[0] != w[1]) {
                    return Err(Error::config(format!("analysis.{name}"), "needs two distinct finite bounds"));
                }
            }
        }
        if let Some(d) = &self.deformation {
            let [lo, hi] = d.fit_range;
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::config("deformation.fit_range", "needs 0 < lower < upper"));
            }
            if d.n_points < 3 {
                return Err(Error::config("deformation.n_points", "at least 3"));
            }
            if d.cases.is_empty() {
                return Err(Error::config("deformation.case", "at least one entry"));
            }
            for (i, c) in d.cases.iter().enumerate() {
                let ok = match *c {
                    Deformation::FlatFacet { half_width } => Deformation::flat(half_width),
                    Deformation::TriangularTip { half_width, height } => {
                        Deformation::tip(half_width, height)
                    }
                };
                ok.map_err(at(format!("deformation.case[{i}]")))?;
            }
        }
        if let Some(p) = &self.patches {
            match (&p.spectrum, &p.table_file) {
                (Some(s), None) => s.validate().map_err(at("patches.spectrum"))?,
                (None, Some(_)) => {}
                _ => {
                    return Err(Error::config(
                        "patches",
                        "give exactly one of `spectrum` or `table_file`",
                    ))
                }
            }
            let d = p.distances.values("patches.distances")?;
            if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::config(format!("patches.distances[{i}]"), "gaps must be positive"));
            }
            if !(p.relative_tolerance > 0.0 && p.relative_tolerance < 1.0) {
                return Err(Error::config("patches.relative_tolerance", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn cylinder(&self) -> Result<Cylinder> {
        let g = self.geometry.ok_or_else(|| missing("geometry"))?;
        Cylinder::new(g.radius, g.length, g.effective_length.unwrap_or(g.length))
            .map_err(at("geometry"))
    }

    pub fn resonator(&self) -> Result<Resonator> {
        let r = self.resonator.ok_or_else(|| missing("resonator"))?;
        Resonator::new(r.effective_mass, r.nu0).map_err(at("resonator"))
    }

    pub fn piezo_map(&self) -> Result<PiezoMap> {
        let p = self.piezo.ok_or_else(|| missing("piezo"))?;
        PiezoMap::new(p.beta, p.v0_pzt).map_err(at("piezo"))
    }

    pub fn scenario_section(&self) -> Result<&ScenarioSection> {
        self.scenario.as_ref().ok_or_else(|| missing("scenario"))
    }

    /// One scenario per `scenario.force` entry; run `i` is seeded with
    /// `seed + i`.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let sc = self.scenario_section()?;
        let cylinder = self.cylinder()?;
        let resonator = self.resonator()?;
        Ok(sc
            .forces
            .iter()
            .enumerate()
            .map(|(i, &force)| Scenario {
                cylinder,
                resonator,
                force,
                v0_profile: sc.v0_profile,
                noise: NoiseModel {
                    seed: sc.noise.seed.wrapping_add(i as u64),
                    ..sc.noise
                },
            })
            .collect())
    }

    /// Piezo voltages of the grid, from `grid.v_pzt` or through the piezo map
    /// from `grid.gap`.
    pub fn v_pzt_grid(&self) -> Result<Vec<f64>> {
        let g = self.grid.as_ref().ok_or_else(|| missing("grid"))?;
        match (&g.v_pzt, &g.gap) {
            (Some(a), _) => a.values("grid.v_pzt"),
            (None, Some(a)) => {
                let map = self.piezo_map()?;
                a.values("grid.gap")?
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| map.piezo_for_gap(d).map_err(at(format!("grid.gap[{i}]"))))
                    .collect()
            }
            (None, None) => Err(Error::config("grid", "missing `v_pzt` or `gap`")),
        }
    }

    pub fn v_bias_grid(&self) -> Result<Vec<f64>> {
        let g = self.grid.as_ref().ok_or_else(|| missing("grid"))?;
        g.v_bias
            .as_ref()
            .ok_or_else(|| missing("grid.v_bias"))?
            .values("grid.v_bias")
    }

    /// Kind of calibration data the analysis commands expect.
    pub fn input_kind(&self) -> Result<ScenarioKind> {
        self.analysis
            .input
            .or(self.scenario.as_ref().map(|s| s.kind))
            .ok_or_else(|| Error::config("analysis.input", "not set and no scenario section to infer it from"))
    }

    pub fn truncation_options(&self) -> TruncationOptions {
        TruncationOptions {
            min_retained: self.analysis.min_retained,
            stride: self.analysis.stride,
            offset: self.analysis.offset,
        }
    }

    pub fn deformation_section(&self) -> Result<&DeformationSection> {
        self.deformation.as_ref().ok_or_else(|| missing("deformation"))
    }

    /// The patch spectrum, reading `table_file` relative to `base_dir`.
    pub fn patch_spectrum(&self, base_dir: &Path) -> Result<PatchSpectrum> {
        let p = self.patches.as_ref().ok_or_else(|| missing("patches"))?;
        match (&p.spectrum, &p.table_file) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(f)) => {
                PatchSpectrum::from_table_file(&base_dir.join(f)).map_err(|e| match e {
                    Error::Io(_) => e,
                    other => Error::config("patches.table_file", other.to_string()),
                })
            }
            (None, None) => Err(missing("patches.spectrum")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[geometry]
radius = 12e-3
length = 4e-3

[resonator]
effective_mass = 1e-5
nu0 = 1e4

[piezo]
beta = 91.9e-9
v0_pzt = 79.52

[scenario]
kind = "curvature"
v0_profile = { kind = "constant", v0 = 0.163 }
noise = { sigma_nu = 0.01, seed = 7 }

[[scenario.force]]
kind = "pure_coulomb"

[[scenario.force]]
kind = "extra_power"
alpha1 = 1e4
alpha2 = 5e4
p = 5.0
length_unit = 1e-6

[grid]
v_pzt = { start = 30.0, stop = 70.0, step = 0.5 }
v_bias = [-0.4, -0.2, 0.0, 0.2, 0.4]
"#;

    fn path_of(text: &str) -> String {
        match Config::from_toml_str(text).unwrap_err() {
            Error::Config { path, .. } => path,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_full_scenario() {
        let c = Config::from_toml_str(BASE).unwrap();
        assert_eq!(c.cylinder().unwrap().effective_length, 4e-3);
        let runs = c.scenarios().unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].noise.seed, 8);
        let v = c.v_pzt_grid().unwrap();
        assert_eq!(v.len(), 81);
        assert_eq!(v[80], 70.0);
        assert_eq!(c.v_bias_grid().unwrap().len(), 5);
        assert_eq!(c.input_kind().unwrap(), ScenarioKind::Curvature);
        assert_eq!(QSpec::from(c.analysis.q), QSpec::Free);
        let q = c.analysis.q_grid.values("q").unwrap();
        assert_eq!(q.len(), 351);
        assert_eq!(q[7], 0.57);
        assert_eq!(c.output.prefix, "run");
    }

    #[test]
    fn unknown_keys_are_reported_with_their_path() {
        assert_eq!(path_of(&format!("{BASE}\n[output]\nprefx = \"a\"\n")), "output.prefx");
        let t = BASE.replace("alpha2 = 5e4", "alpha2 = 5e4\nbeta = 1");
        assert_eq!(path_of(&t), "scenario.force[1]");
        assert_eq!(path_of("[geometry]\nradius = 1\nlength = 1\nwidth = 2\n"), "geometry.width");
        assert_eq!(path_of("colour = 3\n"), "colour");
    }

    #[test]
    fn invalid_values_are_reported_with_their_path() {
        assert_eq!(path_of(&BASE.replace("p = 5.0", "p = 2.0")), "scenario.force[1]");
        assert_eq!(path_of(&BASE.replace("radius = 12e-3", "radius = -1.0")), "geometry");
        assert_eq!(path_of(&BASE.replace("step = 0.5", "step = -0.5")), "grid.v_pzt.step");
        assert_eq!(
            path_of(&BASE.replace("v_pzt = {", "gap = [1e-6, 0.0]\nv_pzt = {")),
            "grid"
        );
        assert_eq!(
            path_of(&BASE.replace("v_pzt = { start = 30.0, stop = 70.0, step = 0.5 }", "gap = [1e-6, 0.0]")),
            "grid.gap[1]"
        );
        assert_eq!(path_of(&format!("{BASE}\n[analysis]\nmin_retained = 3\n")), "analysis.min_retained");
        assert_eq!(path_of(&format!("{BASE}\n[analysis]\nq = \"loose\"\n")), "analysis.q");
        assert_eq!(path_of(&BASE.replace("radius = 12e-3", "radius = \"big\"")), "geometry.radius");
    }

    #[test]
    fn gap_grid_goes_through_piezo_map() {
        let t = BASE.replace(
            "v_pzt = { start = 30.0, stop = 70.0, step = 0.5 }",
            "gap = { start = 1e-6, stop = 1e-5, n = 10, log = true }",
        );
        let c = Config::from_toml_str(&t).unwrap();
        let v = c.v_pzt_grid().unwrap();
        assert_eq!(v.len(), 10);
        assert!((79.52 - v[0] - 1e-6 / 91.9e-9).abs() < 1e-9);
        assert!(v.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn fixed_q_and_missing_sections() {
        let c = Config::from_toml_str("[analysis]\nq = 2.5\ninput = \"fast_approach\"\n").unwrap();
        assert_eq!(QSpec::from(c.analysis.q), QSpec::Fixed(2.5));
        assert_eq!(c.input_kind().unwrap(), ScenarioKind::FastApproach);
        match c.cylinder().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "geometry"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deformation_and_patch_sections() {
        let t = r#"
[deformation]
[[deformation.case]]
kind = "flat_facet"
half_width = 100e-6

[patches]
spectrum = { kind = "flat_band", k_min = 1e3, k_max = 1e5, amplitude = 1e-12 }
distances = { start = 1e-7, stop = 1e-5, n = 5, log = true }
"#;
        let c = Config::from_toml_str(t).unwrap();
        assert_eq!(c.deformation_section().unwrap().n_points, 50);
        assert!(c.patch_spectrum(Path::new(".")).is_ok());
        let both = t.replace("distances", "table_file = \"x.txt\"\ndistances");
        assert_eq!(path_of(&both), "patches");
        let bad = t.replace("half_width = 100e-6", "half_width = 0.0");
        assert_eq!(path_of(&bad), "deformation.case[0]");
    }
}
