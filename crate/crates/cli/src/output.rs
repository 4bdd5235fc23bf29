use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use casimir_core::config::Config;
use casimir_core::dataset;
use casimir_core::{Error, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Common;

pub const TOOL: &str = concat!("casimir-calib ", env!("CARGO_PKG_VERSION"));

/// Loaded configuration plus everything needed to label outputs.
pub struct Ctx {
    pub command: &'static str,
    pub cfg: Config,
    pub config_path: PathBuf,
    pub sha256: String,
    pub out_dir: PathBuf,
    /// Command-line overrides, recorded in every header.
    pub overrides: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

impl Ctx {
    pub fn new(command: &'static str, args: &Common) -> Result<Self> {
        let bytes = std::fs::read(&args.config).map_err(|e| io_err(&args.config, e))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Parse(format!("{}: not UTF-8", args.config.display())))?;
        let mut cfg = Config::from_toml_str(&text)?;
        let mut overrides = Vec::new();
        if let Some(seed) = args.seed {
            overrides.push(format!("seed={seed}"));
            if let Some(sc) = cfg.scenario.as_mut() {
                sc.noise.seed = seed;
            }
        }
        if let Some(g) = args.q_grid {
            overrides.push(format!("q_grid={}:{}:{}", g.min, g.max, g.step));
            cfg.analysis.q_grid = g;
        }
        let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        Ok(Self {
            command,
            cfg,
            config_path: args.config.clone(),
            sha256: sha256_hex(&bytes),
            out_dir,
            overrides,
        })
    }

    /// Directory that relative paths inside the config refer to.
    pub fn config_dir(&self) -> &Path {
        self.config_path.parent().unwrap_or(Path::new("."))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec![
            format!("tool: {TOOL}"),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.sha256),
        ];
        if !self.overrides.is_empty() {
            h.push(format!("overrides: {}", self.overrides.join(" ")));
        }
        h
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir
            .join(format!("{}_{name}", self.cfg.output.prefix))
    }

    /// Files `generate` writes for this config, one per force entry.
    pub fn generated_files(&self) -> Result<Vec<PathBuf>> {
        let n = self.cfg.scenario_section()?.forces.len();
        Ok((0..n).map(|i| self.path(&format!("run{i}.csv"))).collect())
    }

    fn create(&self, name: &str, inputs: &[PathBuf]) -> Result<(PathBuf, BufWriter<File>)> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| io_err(&self.out_dir, e))?;
        let path = self.path(name);
        let same = |p: &PathBuf| match (p.canonicalize(), path.canonicalize()) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if inputs.iter().any(same) || same(&self.config_path) {
            return Err(Error::Io(format!(
                "refusing to overwrite input file {}",
                path.display()
            )));
        }
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok((path, BufWriter::new(f)))
    }

    /// Write a CSV table with the standard header comments plus `notes`.
    pub fn table(
        &self,
        name: &str,
        inputs: &[PathBuf],
        notes: &[String],
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf> {
        let (path, w) = self.create(name, inputs)?;
        let mut comments = self.header();
        comments.extend_from_slice(notes);
        dataset::write_table(w, &comments, columns, rows)?;
        println!("{}", path.display());
        Ok(path)
    }

    /// Write a JSON report carrying the tool version and config hash.
    pub fn report(&self, name: &str, inputs: &[PathBuf], body: Value) -> Result<PathBuf> {
        let mut doc = json!({
            "tool_version": TOOL,
            "command": self.command,
            "config_sha256": self.sha256,
            "overrides": self.overrides,
        });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let (path, mut w) = self.create(name, inputs)?;
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{text}").map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
        println!("{}", path.display());
        Ok(path)
    }
}

pub fn f(x: f64) -> String {
    dataset::fmt_f64(x)
}
