use std::path::{Path, PathBuf};

use casimir_core::config::{Config, ScenarioKind};
use casimir_core::dataset::{self, Dataset};
use casimir_core::deformations::{deformation_exponent, Deformation};
use casimir_core::fitting::{
    effective_mass_from_gamma, exponent_chi2_scan, fast_approach_truncation, fit_curvature_powerlaw,
    fit_fast_approach, fit_parabolas, names, residual_analysis, truncation_scan, CurvatureSample,
    QSpec, ResidualSetup,
};
use casimir_core::models::{
    casimir_force_ideal, coulomb_force_pfa, equivalent_casimir_voltage, Cylinder, Geometry,
    GeometryKind, Resonator,
};
use casimir_core::patches::{patch_energy_pp_estimate, patch_force_cp_estimate, patch_force_cp_large_limit, v_rms};
use casimir_core::quad::Tolerance;
use casimir_core::synth::{
    curvature_pseudo_data, generate_calibration_run, generate_fast_approach_run, CalibrationPoint,
};
use casimir_core::{Error, Result};
use serde_json::{json, Value};

use crate::output::{f, sha256_hex, Ctx, TOOL};

/// Reference sizes for the geometries `table4` has no config for.
const SPHERE_RADIUS: f64 = 12e-3;
const PLATE_AREA: f64 = 1e-4;
const CYLINDER_RADIUS: f64 = 12e-3;
const CYLINDER_LENGTH: f64 = 4e-3;

pub fn table4(d: f64, config: Option<&Path>) -> Result<()> {
    let (cylinder, sha) = match config {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::Parse(format!("{}: not UTF-8", p.display())))?;
            (Config::from_toml_str(&text)?.cylinder()?, sha256_hex(&bytes))
        }
        None => (
            Cylinder::fully_exposed(CYLINDER_RADIUS, CYLINDER_LENGTH)?,
            "none".to_string(),
        ),
    };
    let geometries = [
        Geometry::sphere_plane(SPHERE_RADIUS)?,
        Geometry::CylinderPlane(cylinder),
        Geometry::parallel_planes(PLATE_AREA)?,
    ];
    let mut rows = Vec::new();
    for g in &geometries {
        let kind: GeometryKind = g.kind();
        let v = equivalent_casimir_voltage(kind, d)?;
        rows.push(vec![
            kind.name().to_string(),
            f(kind.xi()),
            f(d),
            f(v),
            f(casimir_force_ideal(g, d)?),
            f(coulomb_force_pfa(g, d, v)?),
        ]);
    }
    let comments = vec![
        format!("tool: {TOOL}"),
        "command: table4".to_string(),
        format!("config_sha256: {sha}"),
        format!(
            "sphere radius {SPHERE_RADIUS} m, cylinder a = {} m L_eff = {} m, plate area {PLATE_AREA} m^2",
            cylinder.radius, cylinder.effective_length
        ),
    ];
    dataset::write_table(
        std::io::stdout().lock(),
        &comments,
        &["geometry", "xi", "d_m", "V_eq_V", "F_casimir_N", "F_coulomb_at_V_eq_N"],
        rows,
    )
}

pub fn generate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let kind = cfg.scenario_section()?.kind;
    let map = cfg.piezo_map()?;
    let v_pzt = cfg.v_pzt_grid()?;
    let mut files = Vec::new();
    for (i, sc) in cfg.scenarios()?.iter().enumerate() {
        let name = format!("run{i}.csv");
        let mut notes = vec![format!("run {i}: seed {}", sc.noise.seed)];
        notes.push(format!(
            "force: {}",
            serde_json::to_string(&sc.force).map_err(|e| Error::Io(e.to_string()))?
        ));
        let path = ctx.path(&name);
        match kind {
            ScenarioKind::CurvaturePseudo => {
                let s = curvature_pseudo_data(sc, &map, &v_pzt)?;
                write_samples(ctx, &name, &[], &notes, &s)?;
            }
            ScenarioKind::Curvature | ScenarioKind::FastApproach => {
                let bias = cfg.v_bias_grid()?;
                let gen = if kind == ScenarioKind::Curvature {
                    generate_calibration_run
                } else {
                    generate_fast_approach_run
                };
                let pts = gen(sc, &map, i as u32, &v_pzt, &bias)?;
                write_points(ctx, &name, &notes, &pts)?;
            }
        }
        files.push(json!({ "file": path.display().to_string(), "seed": sc.noise.seed, "force": sc.force }));
    }
    ctx.report(
        "generate.json",
        &[],
        json!({ "kind": kind, "files": files }),
    )?;
    Ok(())
}

fn write_samples(ctx: &Ctx, name: &str, inputs: &[PathBuf], notes: &[String], s: &[CurvatureSample]) -> Result<PathBuf> {
    ctx.table(
        name,
        inputs,
        notes,
        &dataset::CURVATURE_COLUMNS,
        s.iter().map(|s| {
            vec![f(s.v_pzt), f(s.k_el), f(s.sigma_k), f(s.v0), f(s.sigma_v0), f(s.nu0_sq)]
        }),
    )
}

fn write_points(ctx: &Ctx, name: &str, notes: &[String], pts: &[CalibrationPoint]) -> Result<PathBuf> {
    ctx.table(
        name,
        &[],
        notes,
        &dataset::CALIBRATION_COLUMNS,
        pts.iter().map(|p| {
            vec![
                p.run_id.to_string(),
                p.timestamp.to_string(),
                f(p.v_pzt),
                f(p.v_bias),
                f(p.nu),
                f(p.sigma_nu),
            ]
        }),
    )
}

fn inputs(ctx: &Ctx, data: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if !data.is_empty() {
        return Ok(data.to_vec());
    }
    ctx.generated_files()
        .map_err(|_| Error::config("scenario", "no dataset given and no scenario to locate generated files"))
}

/// Curvature samples of a dataset, fitting parabolas first for bias sweeps.
fn samples_of(ds: Dataset, kind: ScenarioKind) -> Result<(Vec<CurvatureSample>, bool)> {
    match ds {
        Dataset::Curvature(s) => Ok((s, false)),
        Dataset::Calibration(p) if kind != ScenarioKind::FastApproach => Ok((fit_parabolas(&p)?, true)),
        Dataset::Calibration(_) => Err(Error::config(
            "analysis.input",
            "fast-approach data has no curvature samples",
        )),
    }
}

/// Split a fast-approach run into constant-bias approaches, in order of first
/// appearance.
fn approaches(points: &[CalibrationPoint]) -> Vec<Vec<CalibrationPoint>> {
    let mut groups: Vec<((u32, u64), Vec<CalibrationPoint>)> = Vec::new();
    for p in points {
        let key = (p.run_id, p.v_bias.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(*p),
            None => groups.push((key, vec![*p])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn calibration_points(ds: Dataset, file: &Path) -> Result<Vec<CalibrationPoint>> {
    match ds {
        Dataset::Calibration(p) => Ok(p),
        Dataset::Curvature(_) => Err(Error::Parse(format!(
            "{}: expected frequency data, found curvature samples",
            file.display()
        ))),
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

pub fn fit(ctx: &Ctx, data: &[PathBuf]) -> Result<()> {
    let cfg = &ctx.cfg;
    let kind = cfg.input_kind()?;
    let q: QSpec = cfg.analysis.q.into();
    let files = inputs(ctx, data)?;
    let mut reports = Vec::new();
    for (i, file) in files.iter().enumerate() {
        let ds = dataset::read_dataset_file(file)?;
        if kind == ScenarioKind::FastApproach {
            let mut fits = Vec::new();
            for g in approaches(&calibration_points(ds, file)?) {
                let r = fit_fast_approach(&g, q)?;
                fits.push(json!({ "run_id": g[0].run_id, "v_bias_V": g[0].v_bias, "fit": r }));
            }
            reports.push(json!({ "file": file.display().to_string(), "approaches": fits }));
            continue;
        }
        let (samples, fitted) = samples_of(ds, kind)?;
        let table = if fitted {
            let p = write_samples(ctx, &format!("fit{i}_curvature.csv"), &files, &[format!("parabola fits of {}", file.display())], &samples)?;
            Value::String(p.display().to_string())
        } else {
            Value::Null
        };
        let r = fit_curvature_powerlaw(&samples, q, cfg.analysis.offset)?;
        // γ carries the mass only when the exponent is consistent with 2.5.
        let coulomb_like = (r.param(names::Q) - 2.5).abs() <= 3.0 * r.sigma(names::Q);
        let m_eff = match (cfg.cylinder(), cfg.piezo_map()) {
            (Ok(c), Ok(m)) if coulomb_like => effective_mass_from_gamma(r.param(names::GAMMA), &c, m.beta).ok(),
            _ => None,
        };
        let w: f64 = samples.iter().map(|s| weight(s.sigma_v0)).sum();
        let v0_mean = samples.iter().map(|s| weight(s.sigma_v0) * s.v0).sum::<f64>() / w;
        reports.push(json!({
            "file": file.display().to_string(),
            "curvature_table": table,
            "samples": samples.len(),
            "fit": r,
            "m_eff_kg": m_eff,
            "v0_mean_V": v0_mean,
        }));
    }
    ctx.report("fit.json", &files, json!({ "input": kind, "datasets": reports }))?;
    Ok(())
}

/// Inverse-variance weight, or unit weight when no uncertainty is known.
fn weight(sigma: f64) -> f64 {
    if sigma > 0.0 {
        1.0 / (sigma * sigma)
    } else {
        1.0
    }
}

pub fn scan(ctx: &Ctx, data: &[PathBuf]) -> Result<()> {
    let cfg = &ctx.cfg;
    let kind = cfg.input_kind()?;
    let files = inputs(ctx, data)?;
    let mut reports = Vec::new();
    let mut first_failure: Option<Error> = None;
    for (i, file) in files.iter().enumerate() {
        let ds = dataset::read_dataset_file(file)?;
        let note = vec![format!("input: {}", file.display())];
        if kind == ScenarioKind::FastApproach {
            let q: QSpec = cfg.analysis.q.into();
            let mut rows = Vec::new();
            for g in approaches(&calibration_points(ds, file)?) {
                for r in fast_approach_truncation(&g, q, &cfg.analysis.removals)? {
                    rows.push(vec![
                        g[0].run_id.to_string(),
                        f(g[0].v_bias),
                        r.removed.to_string(),
                        r.retained.to_string(),
                        f(r.v_pzt_closest),
                        f(r.q),
                        f(r.sigma_q),
                        f(r.amplitude),
                        f(r.sigma_amplitude),
                        f(r.v0_pzt),
                        f(r.sigma_v0_pzt),
                        f(r.reduced_chi2),
                    ]);
                }
            }
            let p = ctx.table(
                &format!("scan{i}_approach.csv"),
                &files,
                &note,
                &[
                    "run_id", "V_bias_V", "removed", "retained", "V_PZT_closest_V", "q", "sigma_q",
                    "A", "sigma_A", "V0_PZT_V", "sigma_V0_PZT_V", "reduced_chi2",
                ],
                rows,
            )?;
            reports.push(json!({ "file": file.display().to_string(), "approach_table": p.display().to_string() }));
            continue;
        }
        let (samples, _) = samples_of(ds, kind)?;
        let grid = cfg.analysis.q_grid.values("analysis.q_grid")?;
        let chi = exponent_chi2_scan(&samples, &grid, cfg.analysis.offset)?;
        let chi_path = ctx.table(
            &format!("scan{i}_chi2.csv"),
            &files,
            &note,
            &["q", "reduced_chi2", "status"],
            chi.rows.iter().map(|&(q, c)| {
                let status = chi
                    .failures
                    .iter()
                    .find(|(fq, _)| *fq == q)
                    .map_or("ok", |(_, e)| e.class());
                vec![f(q), f(c), status.to_string()]
            }),
        )?;
        if let Some((_, e)) = chi.failures.first() {
            first_failure.get_or_insert_with(|| e.clone());
        }
        let map = cfg.piezo_map()?;
        let rows = truncation_scan(&samples, map.beta, cfg.truncation_options())?;
        let d0 = |x0: f64| map.beta * (map.v0_pzt - x0);
        let mut notes = note.clone();
        notes.push("gamma in Hz^2/V^2 times V^q; d0 = beta*(V0_PZT(config) - V0_PZT(fit))".into());
        let trunc_path = ctx.table(
            &format!("scan{i}_truncation.csv"),
            &files,
            &notes,
            &[
                "removed", "retained", "V_PZT_closest_V", "nominal_distance_m", "q", "sigma_q",
                "gamma_free", "sigma_gamma_free", "V0_PZT_free_V", "sigma_V0_PZT_free_V",
                "reduced_chi2_free", "gamma_fixed", "sigma_gamma_fixed", "V0_PZT_fixed_V",
                "sigma_V0_PZT_fixed_V", "reduced_chi2_fixed", "d0_free_m", "sigma_d0_free_m",
                "d0_fixed_m", "sigma_d0_fixed_m",
            ],
            rows.iter().map(|r| {
                vec![
                    r.removed.to_string(),
                    r.retained.to_string(),
                    f(r.v_pzt_closest),
                    f(r.nominal_distance),
                    f(r.q),
                    f(r.sigma_q),
                    f(r.gamma_free),
                    f(r.sigma_gamma_free),
                    f(r.v0_pzt_free),
                    f(r.sigma_v0_pzt_free),
                    f(r.reduced_chi2_free),
                    f(r.gamma_fixed),
                    f(r.sigma_gamma_fixed),
                    f(r.v0_pzt_fixed),
                    f(r.sigma_v0_pzt_fixed),
                    f(r.reduced_chi2_fixed),
                    f(d0(r.v0_pzt_free)),
                    f(map.beta * r.sigma_v0_pzt_free),
                    f(d0(r.v0_pzt_fixed)),
                    f(map.beta * r.sigma_v0_pzt_fixed),
                ]
            }),
        )?;
        reports.push(json!({
            "file": file.display().to_string(),
            "chi2_table": chi_path.display().to_string(),
            "truncation_table": trunc_path.display().to_string(),
            "q_min": chi.q_min,
            "reduced_chi2_min": chi.reduced_chi2_min,
            "plateau": chi.plateau,
            "failed_q": chi.failures.iter().map(|(q, e)| json!({ "q": q, "error": e.to_string() })).collect::<Vec<_>>(),
        }));
    }
    ctx.report("scan.json", &files, json!({ "input": kind, "datasets": reports }))?;
    // Tables are written in full; the exit status still reports the failure.
    first_failure.map_or(Ok(()), Err)
}

pub fn residuals(ctx: &Ctx, data: &[PathBuf]) -> Result<()> {
    let cfg = &ctx.cfg;
    let a = &cfg.analysis;
    let fit_window = a.fit_window.ok_or_else(|| Error::config("analysis.fit_window", "required for residuals"))?;
    let eval_window = a.eval_window.ok_or_else(|| Error::config("analysis.eval_window", "required for residuals"))?;
    let v0 = a.residual_v0.ok_or_else(|| Error::config("analysis.residual_v0", "required for residuals"))?;
    let setup = ResidualSetup {
        cylinder: cfg.cylinder()?,
        beta: cfg.piezo_map()?.beta,
        v0,
    };
    let files = inputs(ctx, data)?;
    let mut reports = Vec::new();
    for (i, file) in files.iter().enumerate() {
        let pts = calibration_points(dataset::read_dataset_file(file)?, file)?;
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for g in approaches(&pts) {
            let r = residual_analysis(&g, (fit_window[0], fit_window[1]), (eval_window[0], eval_window[1]), &setup)?;
            let peak = r
                .rows
                .iter()
                .filter(|x| !x.in_fit_window)
                .min_by(|x, y| x.nu_sq_residual.total_cmp(&y.nu_sq_residual));
            summary.push(json!({
                "run_id": g[0].run_id,
                "v_bias_V": r.v_bias,
                "m_eff_kg": r.m_eff,
                "d_anchor_m": r.d_anchor,
                "fit": r.fit,
                "peak": peak.map(to_value),
            }));
            for x in &r.rows {
                rows.push(vec![
                    g[0].run_id.to_string(),
                    f(r.v_bias),
                    f(x.v_pzt),
                    f(x.d),
                    f(x.nu_sq_residual),
                    f(x.sigma_nu_sq),
                    f(x.sigma_model),
                    f(x.force_residual),
                    u8::from(x.in_fit_window).to_string(),
                ]);
            }
        }
        let p = ctx.table(
            &format!("residuals{i}.csv"),
            &files,
            &[format!("input: {}", file.display())],
            &[
                "run_id", "V_bias_V", "V_PZT_V", "d_m", "nu_sq_residual_Hz2", "sigma_nu_sq_Hz2",
                "sigma_model_Hz2", "force_residual_N", "in_fit_window",
            ],
            rows,
        )?;
        reports.push(json!({
            "file": file.display().to_string(),
            "table": p.display().to_string(),
            "approaches": summary,
        }));
    }
    ctx.report("residuals.json", &files, json!({ "datasets": reports }))?;
    Ok(())
}

pub fn deformation(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let cyl = cfg.cylinder()?;
    let sec = cfg.deformation_section()?;
    // The exponent does not depend on the mass or frequency.
    let res = match cfg.resonator {
        Some(_) => cfg.resonator()?,
        None => Resonator::new(1.0, 1.0)?,
    };
    let range = (sec.fit_range[0], sec.fit_range[1]);
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for c in &sec.cases {
        let b = deformation_exponent(c, &cyl, &res, range, sec.n_points)?;
        let (name, hw, h) = match *c {
            Deformation::FlatFacet { half_width } => ("flat_facet", half_width, 0.0),
            Deformation::TriangularTip { half_width, height } => ("triangular_tip", half_width, height),
        };
        rows.push(vec![name.to_string(), f(hw), f(h), f(range.0), f(range.1), sec.n_points.to_string(), f(b)]);
        out.push(json!({ "case": c, "B": b }));
    }
    ctx.table(
        "deformation.csv",
        &[],
        &[format!("cylinder radius {} m", cyl.radius)],
        &["case", "half_width_m", "height_m", "d_min_m", "d_max_m", "n_points", "B"],
        rows,
    )?;
    ctx.report("deformation.json", &[], json!({ "cases": out }))?;
    Ok(())
}

pub fn patches(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let cyl = cfg.cylinder()?;
    let spec = cfg.patch_spectrum(ctx.config_dir())?;
    let sec = cfg.patches.as_ref().expect("checked by patch_spectrum");
    let tol = Tolerance {
        absolute: 0.0,
        relative: sec.relative_tolerance,
    };
    let vr = v_rms(&spec)?;
    let mut rows = Vec::new();
    for d in sec.distances.values("patches.distances")? {
        let fc = patch_force_cp_estimate(&spec, &cyl, d, tol)?;
        let large = patch_force_cp_large_limit(&cyl, d, vr)?;
        let u = patch_energy_pp_estimate(&spec, d, tol)?;
        rows.push(vec![
            f(d),
            f(fc.value),
            f(fc.error),
            f(large),
            f(fc.value / large),
            f(u.value),
            f(u.error),
        ]);
    }
    ctx.table(
        "patches.csv",
        &[],
        &[format!("V_rms {} V; cylinder a = {} m, L = {} m", f(vr), cyl.radius, cyl.length)],
        &[
            "d_m", "F_patch_N", "F_patch_error_N", "F_large_patch_N", "ratio", "U_pp_J_per_m2",
            "U_pp_error_J_per_m2",
        ],
        rows,
    )?;
    Ok(())
}
