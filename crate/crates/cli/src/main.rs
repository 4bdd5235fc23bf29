use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod units;

#[derive(Parser)]
#[command(name = "casimir-calib", version, about = "Electrostatic calibration analysis for cylinder-plane Casimir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equivalent Casimir voltage and the matching forces for the three geometries.
    Table4 {
        /// Gap with unit, e.g. `1um`, `500nm`, `2e-6m`.
        #[arg(long, default_value = "1um", value_parser = units::parse_distance, allow_hyphen_values = true)]
        distance: f64,
        /// Optional scenario file; its geometry section sets the cylinder.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate synthetic datasets, one file per `scenario.force` entry.
    Generate(Common),
    /// Parabola and power-law fits.
    Fit(Analysis),
    /// Exponent χ² scan and truncation scans.
    Scan(Analysis),
    /// Near-contact residuals of constant-bias approaches.
    Residuals(Analysis),
    /// Effective exponents of deformed cylinders.
    Deformation(Common),
    /// Patch-potential force versus distance.
    Patches(Common),
}

#[derive(Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `scenario.noise.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `analysis.q_grid`, as `MIN:MAX:STEP`.
    #[arg(long, value_parser = units::parse_q_grid)]
    pub q_grid: Option<casimir_core::config::QGrid>,
}

#[derive(Args)]
pub struct Analysis {
    #[command(flatten)]
    pub common: Common,
    /// Dataset files; defaults to the files `generate` writes for this config.
    pub data: Vec<PathBuf>,
}

fn exit_code(class: &str) -> u8 {
    match class {
        "config" => 3,
        "io" | "parse" => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Table4 { distance, config } => commands::table4(distance, config.as_deref()),
        Command::Generate(c) => output::Ctx::new("generate", &c).and_then(|ctx| commands::generate(&ctx)),
        Command::Fit(a) => output::Ctx::new("fit", &a.common).and_then(|ctx| commands::fit(&ctx, &a.data)),
        Command::Scan(a) => output::Ctx::new("scan", &a.common).and_then(|ctx| commands::scan(&ctx, &a.data)),
        Command::Residuals(a) => {
            output::Ctx::new("residuals", &a.common).and_then(|ctx| commands::residuals(&ctx, &a.data))
        }
        Command::Deformation(c) => {
            output::Ctx::new("deformation", &c).and_then(|ctx| commands::deformation(&ctx))
        }
        Command::Patches(c) => output::Ctx::new("patches", &c).and_then(|ctx| commands::patches(&ctx)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(exit_code(e.class()))
        }
    }
}
