//! Cell execution and result files.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use irs_isac::altopt::{run_scheme, RunRecord, Scheme};
use irs_isac::channel::{build_channels, ChannelSet, CuType, ScenarioConfig};
use irs_isac::relax::{beampattern_gain, AuditReport};
use irs_isac::Error;

use crate::spec::ExperimentSpec;
use crate::{EXIT_AUDIT, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER};

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const BEAMPATTERN_CSV: &str = "beampattern.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Beampattern grid in degrees; the endfire directions are excluded.
pub const BEAMPATTERN_GRID: std::ops::RangeInclusive<i32> = -89..=89;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    AuditFailed,
    SolverFailed,
    InvalidInput,
}

#[derive(Debug)]
pub enum Outcome {
    Done {
        record: Box<RunRecord>,
        channels: Box<ChannelSet>,
    },
    Failed {
        trace: Vec<f64>,
        error: Error,
    },
}

#[derive(Debug)]
pub struct Cell {
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub outcome: Outcome,
}

impl Cell {
    pub fn status(&self) -> Status {
        match &self.outcome {
            Outcome::Done { record, .. } if record.audit.passes() => Status::Ok,
            Outcome::Done { .. } => Status::AuditFailed,
            Outcome::Failed {
                error: Error::InvalidInput(_),
                ..
            } => Status::InvalidInput,
            Outcome::Failed { .. } => Status::SolverFailed,
        }
    }

    pub fn record(&self) -> Option<&RunRecord> {
        match &self.outcome {
            Outcome::Done { record, .. } => Some(record),
            Outcome::Failed { .. } => None,
        }
    }

    pub fn trace(&self) -> &[f64] {
        match &self.outcome {
            Outcome::Done { record, .. } => &record.trace,
            Outcome::Failed { trace, .. } => trace,
        }
    }
}

/// Channels come from `seed`; the design draws from a separate stream of it.
pub fn run_cell(spec: &ExperimentSpec, sweep_value: Option<f64>, scheme: Scheme, seed: u64) -> Cell {
    let config = spec.scenario_for(sweep_value, scheme, seed);
    let outcome = match build_channels(&config, &mut ChaCha8Rng::seed_from_u64(seed)) {
        Err(error) => Outcome::Failed {
            trace: Vec::new(),
            error,
        },
        Ok(channels) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            match run_scheme(scheme, &channels, &config, &spec.algo, &mut rng) {
                Ok(record) => Outcome::Done {
                    record: Box::new(record),
                    channels: Box::new(channels),
                },
                Err(f) => {
                    let f = *f;
                    Outcome::Failed {
                        trace: f.trace,
                        error: f.source,
                    }
                }
            }
        }
    };
    Cell {
        sweep_value,
        scheme,
        seed,
        config,
        outcome,
    }
}

pub fn execute(spec: &ExperimentSpec) -> Vec<Cell> {
    spec.cells()
        .into_iter()
        .map(|(v, scheme, seed)| run_cell(spec, v, scheme, seed))
        .collect()
}

/// 0 when every run passes its audit; otherwise 2 for rejected input, then
/// 3 for solver failures, then 1 for audit violations.
pub fn exit_code(cells: &[Cell]) -> i32 {
    let statuses: Vec<Status> = cells.iter().map(Cell::status).collect();
    if statuses.contains(&Status::InvalidInput) {
        EXIT_CONFIG
    } else if statuses.contains(&Status::SolverFailed) {
        EXIT_SOLVER
    } else if statuses.contains(&Status::AuditFailed) {
        EXIT_AUDIT
    } else {
        EXIT_OK
    }
}

#[derive(Serialize)]
struct ConvergenceRow<'a> {
    scheme: &'a str,
    seed: u64,
    iter: usize,
    #[serde(rename = "objective_W")]
    objective: f64,
}

#[derive(Serialize)]
struct BeampatternRow<'a> {
    scheme: &'a str,
    seed: u64,
    angle_deg: i32,
    #[serde(rename = "gain_W")]
    gain: f64,
}

#[derive(Serialize)]
struct SweepRow<'a> {
    scheme: &'a str,
    sweep_value: f64,
    seed: u64,
    #[serde(rename = "min_gain_W")]
    min_gain: Option<f64>,
    iterations: usize,
    feasible: bool,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scheme: &'a str,
    cu_type: CuType,
    seed: u64,
    sweep_value: Option<f64>,
    status: Status,
    #[serde(rename = "objective_W")]
    objective: Option<f64>,
    iterations: usize,
    converged: bool,
    wall_time_s: Option<f64>,
    audit: Option<AuditReport>,
    note: Option<&'a str>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    exit_code: i32,
    runs_total: usize,
    runs_failed: usize,
    audit_max: AuditReport,
    spec: &'a ExperimentSpec,
    runs: Vec<RunSummary<'a>>,
}

/// Writes the CSV files and `summary.json` into `dir`, creating it if needed.
/// Without a sweep, `convergence.csv` and `beampattern.csv` are written;
/// with one, `sweep.csv`.
pub fn write_outputs(spec: &ExperimentSpec, cells: &[Cell], dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    match &spec.sweep {
        None => {
            let mut conv = csv::Writer::from_path(dir.join(CONVERGENCE_CSV))?;
            let mut beam = csv::Writer::from_path(dir.join(BEAMPATTERN_CSV))?;
            for cell in cells {
                let scheme = cell.scheme.name();
                for (iter, &objective) in cell.trace().iter().enumerate() {
                    conv.serialize(ConvergenceRow {
                        scheme,
                        seed: cell.seed,
                        iter,
                        objective,
                    })?;
                }
                if let Outcome::Done { record, channels } = &cell.outcome {
                    let r = record.beamforming.covariance();
                    for deg in BEAMPATTERN_GRID {
                        let gain =
                            beampattern_gain(channels, record.phi(), (deg as f64).to_radians(), &r, &cell.config)?;
                        beam.serialize(BeampatternRow {
                            scheme,
                            seed: cell.seed,
                            angle_deg: deg,
                            gain,
                        })?;
                    }
                }
            }
            conv.flush()?;
            beam.flush()?;
        }
        Some(_) => {
            let mut sweep = csv::Writer::from_path(dir.join(SWEEP_CSV))?;
            for cell in cells {
                let record = cell.record();
                sweep
                    .serialize(SweepRow {
                        scheme: cell.scheme.name(),
                        sweep_value: cell.sweep_value.unwrap_or(f64::NAN),
                        seed: cell.seed,
                        min_gain: record.map(RunRecord::objective),
                        iterations: record.map_or(cell.trace().len().saturating_sub(1), |r| r.iterations),
                        feasible: cell.status() == Status::Ok,
                    })?;
            }
            sweep.flush()?;
        }
    }

    let mut audit_max = AuditReport::default();
    let runs: Vec<RunSummary> = cells
        .iter()
        .map(|cell| {
            let record = cell.record();
            if let Some(r) = record {
                audit_max = audit_max.merge(&r.audit);
            }
            RunSummary {
                scheme: cell.scheme.name(),
                cu_type: cell.config.cu_type,
                seed: cell.seed,
                sweep_value: cell.sweep_value,
                status: cell.status(),
                objective: record.map(RunRecord::objective),
                iterations: record.map_or(cell.trace().len().saturating_sub(1), |r| r.iterations),
                converged: record.is_some_and(|r| r.converged),
                wall_time_s: record.map(|r| r.wall_time.as_secs_f64()),
                audit: record.map(|r| r.audit),
                note: record.and_then(|r| r.note),
                error: match &cell.outcome {
                    Outcome::Failed { error, .. } => Some(error.to_string()),
                    Outcome::Done { .. } => None,
                },
            }
        })
        .collect();
    let summary = Summary {
        scenario: &spec.scenario,
        exit_code: exit_code(cells),
        runs_total: cells.len(),
        runs_failed: cells.iter().filter(|c| c.status() != Status::Ok).count(),
        audit_max,
        spec,
        runs,
    };
    fs::write(dir.join(SUMMARY_JSON), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
