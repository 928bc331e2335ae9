//! Command-line experiments for the IRS-assisted ISAC beampattern designs.
//!
//! `irs-isac run` reads a JSON experiment (or a built-in preset), runs every
//! (sweep value, scheme, seed) cell and writes CSV results plus a
//! `summary.json` with per-run status and audit maxima.

pub mod preset;
pub mod run;
pub mod spec;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::preset::{merge, Preset};
use crate::spec::{from_value, ExperimentSpec, SpecError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "irs-isac", version, about = "Max-min sensing beampattern experiments for IRS-assisted ISAC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its results.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON experiment; merged over the preset when both are given.
    #[arg(long, required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: the config's `output`, else ./results].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Cap N at 16 and randomization trials at 200.
    #[arg(long)]
    pub fast: bool,
}

impl RunArgs {
    pub fn spec(&self) -> Result<ExperimentSpec, SpecError> {
        let mut doc = match self.preset {
            Some(p) => p.document(),
            None => serde_json::json!({}),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
                path: path.clone(),
                source,
            })?;
            merge(&mut doc, serde_json::from_str(&text)?);
        }
        if let Some(seed) = self.seed {
            merge(&mut doc, serde_json::json!({ "seeds": [seed] }));
        }
        let mut spec = from_value(doc)?;
        if self.fast {
            spec.make_fast();
        }
        Ok(spec)
    }

    pub fn out_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        self.out
            .clone()
            .or_else(|| spec.output.clone())
            .unwrap_or_else(|| PathBuf::from("results"))
    }
}

/// Runs the command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Run(args) => run_command(args),
    }
}

fn run_command(args: &RunArgs) -> i32 {
    let spec = match args.spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = args.out_dir(&spec);
    let cells = run::execute(&spec);
    for cell in &cells {
        let value = cell.sweep_value.map(|v| format!(" {}={v}", spec.sweep.as_ref().map_or("", |s| s.var.name())));
        match cell.record() {
            Some(r) => eprintln!(
                "{}{} seed {}: {:?}, min gain {:.6e} W after {} iterations",
                cell.scheme,
                value.unwrap_or_default(),
                cell.seed,
                cell.status(),
                r.objective(),
                r.iterations
            ),
            None => eprintln!("{}{} seed {}: {:?}", cell.scheme, value.unwrap_or_default(), cell.seed, cell.status()),
        }
    }
    let written = run::write_outputs(&spec, &cells, &dir).with_context(|| format!("writing results to {}", dir.display()));
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return EXIT_CONFIG;
    }
    run::exit_code(&cells)
}
