use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_casimir-calib"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// CSV rows after the header comments, split into fields.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn table4_default_and_scaled() {
    let o = run(&["table4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    let v: Vec<f64> = r.iter().map(|x| x[3].parse().unwrap()).collect();
    for (got, want) in v.iter().zip([9.85e-3, 13.5e-3, 17.1e-3]) {
        assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
    }
    for x in &r {
        let fc: f64 = x[4].parse().unwrap();
        let fe: f64 = x[5].parse().unwrap();
        assert!((fc / fe - 1.0).abs() < 1e-12);
    }
    let o3 = run(&["table4", "--distance", "3um"]);
    for (a, b) in rows(&stdout(&o3)).iter().zip(&r) {
        let a: f64 = a[3].parse().unwrap();
        let b: f64 = b[3].parse().unwrap();
        assert!((a * 3.0 / b - 1.0).abs() < 1e-12);
    }
}

#[test]
fn table4_rejects_bad_distances() {
    for d in ["0um", "-1nm", "3 parsecs"] {
        let o = run(&["table4", "--distance", d]);
        assert_eq!(o.status.code(), Some(2), "{d}");
        assert!(stderr(&o).contains("--distance"));
    }
}

#[test]
fn deformation_reports_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = scenario("deformation.toml");
    let o = run(&["deformation", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("deformation_deformation.csv")).unwrap();
    let hash = hex::encode(Sha256::digest(std::fs::read(&cfg).unwrap()));
    assert!(text.contains(&format!("# config_sha256: {hash}")));
    assert!(text.contains("# tool: casimir-calib "));
    let r = rows(&text);
    let b: Vec<f64> = r.iter().map(|x| x[6].parse().unwrap()).collect();
    assert!((b[0] - 2.8).abs() < 0.05, "{b:?}");
    assert!((b[1] - 2.0).abs() < 0.05, "{b:?}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("deformation_deformation.json")).unwrap()).unwrap();
    assert_eq!(json["config_sha256"], hash);
    assert!(json["tool_version"].as_str().unwrap().starts_with("casimir-calib"));
}

const SMALL_EXTRA_FORCE: &str = r#"
[geometry]
radius = 12e-3
length = 4e-3

[resonator]
effective_mass = 1e-5
nu0 = 1e4

[piezo]
beta = 91.9e-9
v0_pzt = 600.0

[scenario]
kind = "curvature_pseudo"
v0_profile = { kind = "constant", v0 = 0.0 }
noise = { sigma_nu = 0.0, sigma_k = 1.0, seed = 1, inject = false }

[[scenario.force]]
kind = "extra_power"
alpha1 = 1e4
alpha2 = 1e5
p = 5.0
length_unit = 1e-6

[grid]
gap = { start = 2e-7, stop = 3e-5, step = 2e-7 }

[analysis]
q_grid = { min = 1.0, max = 6.0, step = 0.05 }
min_retained = 20
stride = 10
"#;

#[test]
fn generate_then_scan_is_deterministic_and_reproduces_the_dip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "extra.toml", SMALL_EXTRA_FORCE);
    let mut snapshots = Vec::new();
    let out = dir.path().join("o");
    for _ in 0..2 {
        let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let g = bin().arg("generate").args(args).output().unwrap();
        assert!(g.status.success(), "{}", stderr(&g));
        let s = bin().arg("scan").args(args).output().unwrap();
        assert!(s.status.success(), "{}", stderr(&s));
        let names = ["run_run0.csv", "run_scan0_truncation.csv", "run_scan0_chi2.csv", "run_scan.json"];
        snapshots.push(names.map(|n| std::fs::read(out.join(n)).unwrap()));
    }
    assert_eq!(snapshots[0], snapshots[1]);

    let table = String::from_utf8(snapshots[0][1].clone()).unwrap();
    let q: Vec<f64> = rows(&table).iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(q[0] > 4.5, "{q:?}");
    assert!(q.iter().cloned().fold(f64::INFINITY, f64::min) < 2.45, "{q:?}");
    assert!((q.last().unwrap() - 2.5).abs() < 0.05, "{q:?}");
}

#[test]
fn seed_changes_noise_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noisy.toml",
        &SMALL_EXTRA_FORCE.replace("inject = false", "inject = true"),
    );
    let gen = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = run(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out.join("run_run0.csv")).unwrap()
    };
    let a = gen("5", "a");
    let b = gen("6", "b");
    assert!(a.contains("# overrides: seed=5"));
    assert_ne!(rows(&a), rows(&b));
    assert_eq!(a, gen("5", "c"));
}

#[test]
fn coulomb_calibration_fit_recovers_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = scenario("coulomb_calibration.toml");
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert!(bin().arg("generate").args(args).output().unwrap().status.success());
    let o = bin().arg("fit").args(args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("coulomb_fit.json")).unwrap()).unwrap();
    let fit = &json["datasets"][0]["fit"];
    let q = fit["params"]["q"].as_f64().unwrap();
    let sq = fit["sigmas"]["q"].as_f64().unwrap();
    assert!((q - 2.5).abs() < 4.0 * sq, "q = {q} ± {sq}");
    let m = json["datasets"][0]["m_eff_kg"].as_f64().unwrap();
    assert!((m / 1e-5 - 1.0).abs() < 0.05, "{m}");
    assert!(out.join("coulomb_fit0_curvature.csv").exists());
}

#[test]
fn residuals_of_coulomb_approach_vanish_within_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = scenario("fast_approach_coulomb.toml");
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert!(bin().arg("generate").args(args).output().unwrap().status.success());
    let o = bin().arg("residuals").args(args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("approach_coulomb_residuals0.csv")).unwrap();
    let r = rows(&text);
    let chi2: f64 = r
        .iter()
        .map(|x| {
            let res: f64 = x[4].parse().unwrap();
            let s: f64 = x[5].parse().unwrap();
            let m: f64 = x[6].parse().unwrap();
            res * res / (s * s + m * m)
        })
        .sum();
    let n = r.len() as f64;
    assert!(chi2 / n < 2.0, "chi2/n = {}", chi2 / n);
}

#[test]
fn config_errors_name_the_key_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        &SMALL_EXTRA_FORCE.replace("[analysis]", "[analysis]\nstrid = 3"),
    );
    let o = run(&["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.starts_with("error[config]"), "{e}");
    assert!(e.contains("analysis.strid"), "{e}");

    let cfg = write_config(dir.path(), "bad2.toml", &SMALL_EXTRA_FORCE.replace("p = 5.0", "p = 1.0"));
    let e = stderr(&run(&["generate", "--config", cfg.to_str().unwrap()]));
    assert!(e.contains("scenario.force[0]"), "{e}");

    let o = run(&["residuals", "--config", scenario("coulomb_calibration.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("analysis.fit_window"));
}

#[test]
fn io_errors_and_inputs_are_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fit", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[io]"));

    let cfg = write_config(dir.path(), "extra.toml", SMALL_EXTRA_FORCE);
    let out = dir.path().join("o");
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = bin().arg("fit").args(args).arg(dir.path().join("nope.csv")).output().unwrap();
    assert_eq!(o.status.code(), Some(4));

    assert!(bin().arg("generate").args(args).output().unwrap().status.success());
    let data = out.join("run_run0.csv");
    let before = std::fs::read(&data).unwrap();
    let cfg_before = std::fs::read(&cfg).unwrap();
    let o = bin().arg("fit").args(args).arg(&data).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&data).unwrap(), before);
    assert_eq!(std::fs::read(&cfg).unwrap(), cfg_before);
}

#[test]
fn patches_table_spans_both_limits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = scenario("patches.toml");
    let o = run(&["patches", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&std::fs::read_to_string(out.join("patches_patches.csv")).unwrap());
    let ratio: Vec<f64> = r.iter().map(|x| x[4].parse().unwrap()).collect();
    assert!(ratio[0] > 0.9 && ratio[0] <= 1.0, "{ratio:?}");
    assert!(*ratio.last().unwrap() < 1e-6, "{ratio:?}");
    assert!(ratio.windows(2).all(|w| w[1] < w[0]));
}
