//! Delimited-text datasets.
//!
//! Files start with `#` comment lines (tool version, config hash, …) followed
//! by a header row whose column names carry SI unit suffixes, e.g. `V_PZT_V`.
//! Readers also accept the bare names (`V_PZT`, `nu`, …).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fitting::CurvatureSample;
use crate::synth::CalibrationPoint;

pub const CALIBRATION_COLUMNS: [&str; 6] = [
    "run_id",
    "timestamp",
    "V_PZT_V",
    "V_bias_V",
    "nu_Hz",
    "sigma_nu_Hz",
];

pub const CURVATURE_COLUMNS: [&str; 6] = [
    "V_PZT_V",
    "K_el_Hz2_per_V2",
    "sigma_K_Hz2_per_V2",
    "V0_V",
    "sigma_V0_V",
    "nu0_sq_Hz2",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Calibration(Vec<CalibrationPoint>),
    Curvature(Vec<CurvatureSample>),
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse(e.to_string()),
    }
}

/// Format a float so that it reads back bit-identically.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-3 && x.abs() < 1e7 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Write `# line` comments, a header row and numeric rows.
pub fn write_table<W: Write>(
    mut out: W,
    comments: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calibration<W: Write>(
    out: W,
    comments: &[String],
    points: &[CalibrationPoint],
) -> Result<()> {
    write_table(
        out,
        comments,
        &CALIBRATION_COLUMNS,
        points.iter().map(|p| {
            vec![
                p.run_id.to_string(),
                p.timestamp.to_string(),
                fmt_f64(p.v_pzt),
                fmt_f64(p.v_bias),
                fmt_f64(p.nu),
                fmt_f64(p.sigma_nu),
            ]
        }),
    )
}

pub fn write_curvature<W: Write>(
    out: W,
    comments: &[String],
    samples: &[CurvatureSample],
) -> Result<()> {
    write_table(
        out,
        comments,
        &CURVATURE_COLUMNS,
        samples.iter().map(|s| {
            vec![
                fmt_f64(s.v_pzt),
                fmt_f64(s.k_el),
                fmt_f64(s.sigma_k),
                fmt_f64(s.v0),
                fmt_f64(s.sigma_v0),
                fmt_f64(s.nu0_sq),
            ]
        }),
    )
}

/// Index of the column called `name`, with or without a `_unit` suffix.
fn column(header: &csv::StringRecord, name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim() == name).or_else(|| {
        let prefix = format!("{name}_");
        header.iter().position(|h| h.trim().starts_with(&prefix))
    })
}

fn require(header: &csv::StringRecord, name: &str) -> Result<usize> {
    column(header, name).ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse()
        .map_err(|e| Error::Parse(format!("line {line}: `{raw}`: {e}")))
}

/// Read either dataset kind, recognized by its header.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if column(&header, "K_el").is_some() {
        let cols = ["V_PZT", "K_el", "sigma_K", "V0", "sigma_V0", "nu0_sq"]
            .map(|c| require(&header, c));
        let [vp, k, sk, v0, sv0, nu0] = cols;
        let (vp, k, sk, v0, sv0, nu0) = (vp?, k?, sk?, v0?, sv0?, nu0?);
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            out.push(CurvatureSample {
                v_pzt: field(&rec, vp, line)?,
                k_el: field(&rec, k, line)?,
                sigma_k: field(&rec, sk, line)?,
                v0: field(&rec, v0, line)?,
                sigma_v0: field(&rec, sv0, line)?,
                nu0_sq: field(&rec, nu0, line)?,
            });
        }
        return Ok(Dataset::Curvature(out));
    }
    if column(&header, "nu").is_some() {
        let run = column(&header, "run_id");
        let ts = column(&header, "timestamp");
        let vp = require(&header, "V_PZT")?;
        let vb = require(&header, "V_bias")?;
        let nu = require(&header, "nu")?;
        let snu = require(&header, "sigma_nu")?;
        let mut out = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            out.push(CalibrationPoint {
                run_id: run.map_or(Ok(0), |c| field(&rec, c, line))?,
                timestamp: ts.map_or(Ok(i as u64), |c| field(&rec, c, line))?,
                v_pzt: field(&rec, vp, line)?,
                v_bias: field(&rec, vb, line)?,
                nu: field(&rec, nu, line)?,
                sigma_nu: field(&rec, snu, line)?,
            });
        }
        return Ok(Dataset::Calibration(out));
    }
    Err(Error::Parse(
        "unrecognized dataset header: expected a `nu` or `K_el` column".into(),
    ))
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> Vec<CalibrationPoint> {
        vec![
            CalibrationPoint {
                run_id: 2,
                timestamp: 0,
                v_pzt: 70.123456789,
                v_bias: -0.337,
                nu: 1999.99987654321,
                sigma_nu: 0.01,
            },
            CalibrationPoint {
                run_id: 2,
                timestamp: 1,
                v_pzt: 70.123456789,
                v_bias: 1e-9,
                nu: 2000.0,
                sigma_nu: 0.0,
            },
        ]
    }

    #[test]
    fn calibration_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_calibration(&mut buf, &["tool 0.1".into(), "config_sha256 abc".into()], &points())
            .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# tool 0.1\n# config_sha256 abc\nrun_id,timestamp,V_PZT_V,"));
        assert_eq!(read_dataset(&buf[..]).unwrap(), Dataset::Calibration(points()));
    }

    #[test]
    fn bare_names_and_missing_optional_columns() {
        let text = "V_PZT,V_bias,nu,sigma_nu\n10,0.5,1000,0.1\n10,-0.5,999,0.1\n";
        match read_dataset(text.as_bytes()).unwrap() {
            Dataset::Calibration(p) => {
                assert_eq!(p.len(), 2);
                assert_eq!(p[1].timestamp, 1);
                assert_eq!(p[1].nu, 999.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curvature_round_trip() {
        let s = vec![CurvatureSample {
            v_pzt: 50.0,
            k_el: 1.234e-3,
            sigma_k: 5e-7,
            v0: 0.163,
            sigma_v0: 1e-4,
            nu0_sq: 4e6,
        }];
        let mut buf = Vec::new();
        write_curvature(&mut buf, &[], &s).unwrap();
        assert_eq!(read_dataset(&buf[..]).unwrap(), Dataset::Curvature(s));
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(read_dataset("a,b\n1,2\n".as_bytes()).unwrap_err().class(), "parse");
        let bad = "V_PZT,V_bias,nu,sigma_nu\n10,x,1000,0.1\n";
        assert_eq!(read_dataset(bad.as_bytes()).unwrap_err().class(), "parse");
        let short = "V_PZT,nu,sigma_nu\n10,1000,0.1\n";
        assert!(read_dataset(short.as_bytes()).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -0.163, 1e-12, 123456789.0, 6.02214076e23, 2000.000000001] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
