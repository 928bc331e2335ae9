//! Alternating optimization between the beamforming and reflection
//! subproblems, plus the benchmark schemes it is compared against.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, CuType, EffectiveChannels, ScenarioConfig};
use crate::error::{Error, Result};
use crate::matrix::{hermitize, quad_form, CMatrix, CVector};
use crate::relax::{
    self, cascade, lift_quadratic, AuditReport, BeamformingKind, BeamformingSolution, Beamformers,
    Metrics, PhaseSolution,
};
use crate::sdp::{self, LinearForm, Relation, SdpProblem, Sense, SolveStatus, SolverOptions};

/// How the first phase vector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Phases uniform on `[0, 2π)`, drawn from the run generator.
    Random,
    /// `φ = 1`.
    ZeroPhase,
    /// Phases that steer an isotropic transmission toward the targets,
    /// refined from a uniform random draw.
    #[default]
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgoConfig {
    pub max_iters: usize,
    /// Stopping tolerance on the objective change (W, or relative).
    pub eps: f64,
    pub relative_stop: bool,
    pub rand_trials: usize,
    pub rank_tol: f64,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    pub init: InitStrategy,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            eps: 1e-6,
            relative_stop: false,
            rand_trials: 5000,
            rank_tol: relax::DEFAULT_RANK_TOL,
            sdp_tol: 1e-10,
            sdp_max_iters: sdp::DEFAULT_MAX_ITERS,
            init: InitStrategy::Isotropic,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be positive, got {}", self.eps)));
        }
        if !(0.0..1.0).contains(&self.rank_tol) {
            return Err(Error::InvalidInput(format!("rank_tol must lie in [0, 1), got {}", self.rank_tol)));
        }
        if !(self.sdp_tol > 0.0 && self.sdp_tol < 1.0) {
            return Err(Error::InvalidInput(format!("sdp_tol must lie in (0, 1), got {}", self.sdp_tol)));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.sdp_tol,
            max_iters: self.sdp_max_iters,
            ..SolverOptions::default()
        }
    }

    fn stop(&self, prev: f64, cur: f64) -> bool {
        let delta = (cur - prev).abs();
        if self.relative_stop {
            delta < self.eps * prev.abs().max(f64::MIN_POSITIVE)
        } else {
            delta < self.eps
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Joint design for Type-I users.
    Algorithm1,
    /// Joint design for Type-II users.
    Algorithm2,
    InfoBeamforming,
    SeparateDesign,
    RandomPhase,
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Algorithm1,
        Scheme::Algorithm2,
        Scheme::InfoBeamforming,
        Scheme::SeparateDesign,
        Scheme::RandomPhase,
        Scheme::NoIrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Algorithm1 => "algorithm1",
            Scheme::Algorithm2 => "algorithm2",
            Scheme::InfoBeamforming => "info-beamforming",
            Scheme::SeparateDesign => "separate-design",
            Scheme::RandomPhase => "random-phase",
            Scheme::NoIrs => "no-irs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme {s:?}")))
    }
}

/// Outcome of one scheme on one channel realization.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub cu_type: CuType,
    /// Objective (min target gain, W) after the initial BS step and after
    /// every subsequent iteration.
    pub trace: Vec<f64>,
    /// Objective after each phase step, one per iteration.
    pub phase_trace: Vec<f64>,
    pub beamforming: BeamformingSolution,
    /// `None` when the scheme has no IRS.
    pub phase: Option<PhaseSolution>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    pub metrics: Metrics,
    pub audit: AuditReport,
    pub note: Option<&'static str>,
}

impl RunRecord {
    pub fn objective(&self) -> f64 {
        self.metrics.min_gain()
    }

    pub fn phi(&self) -> Option<&CVector> {
        self.phase.as_ref().map(|p| &p.phi)
    }
}

/// A run that stopped early; `trace` holds the objectives reached so far.
#[derive(Debug, thiserror::Error)]
#[error("{scheme} aborted after {} iterations: {source}", trace.len().saturating_sub(1))]
pub struct RunFailure {
    pub scheme: Scheme,
    pub trace: Vec<f64>,
    #[source]
    pub source: Error,
}

impl RunFailure {
    /// Solver status when the abort came from a subproblem.
    pub fn status(&self) -> Option<SolveStatus> {
        match self.source {
            Error::Subproblem { status, .. } => Some(status),
            _ => None,
        }
    }
}

pub type RunResult = std::result::Result<RunRecord, Box<RunFailure>>;

pub fn init_phase<R: Rng + ?Sized>(n: usize, strategy: InitStrategy, rng: &mut R) -> CVector {
    match strategy {
        InitStrategy::Random => {
            let angles: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            crate::channel::phases_to_vector(&angles)
        }
        InitStrategy::ZeroPhase | InitStrategy::Isotropic => {
            crate::channel::phases_to_vector(&vec![0.0; n])
        }
    }
}

struct Run<'a> {
    scheme: Scheme,
    channels: &'a ChannelSet,
    config: &'a ScenarioConfig,
    algo: &'a AlgoConfig,
    trace: Vec<f64>,
    phase_trace: Vec<f64>,
    start: Instant,
}

impl<'a> Run<'a> {
    fn new(
        scheme: Scheme,
        channels: &'a ChannelSet,
        config: &'a ScenarioConfig,
        algo: &'a AlgoConfig,
    ) -> std::result::Result<Self, Box<RunFailure>> {
        let mut run = Self {
            scheme,
            channels,
            config,
            algo,
            trace: Vec::new(),
            phase_trace: Vec::new(),
            start: Instant::now(),
        };
        let check = config.validate().and_then(|_| algo.validate()).and_then(|_| {
            if channels.m() != config.m
                || channels.n() != config.n
                || channels.k() != config.k
                || channels.q() != config.q
                || channels.l() != config.l()
            {
                Err(Error::InvalidInput("channels do not match the scenario".into()))
            } else {
                Ok(())
            }
        });
        run.lift(check)?;
        Ok(run)
    }

    fn lift<T>(&mut self, r: Result<T>) -> std::result::Result<T, Box<RunFailure>> {
        r.map_err(|source| {
            Box::new(RunFailure {
                scheme: self.scheme,
                trace: std::mem::take(&mut self.trace),
                source,
            })
        })
    }

    /// BS step at fixed `φ`; vector form for the kinds with `R0`, matrix form
    /// for information beamforming.
    fn bs_step(&self, eff: &EffectiveChannels, kind: BeamformingKind) -> Result<BeamformingSolution> {
        let sol = relax::solve_beamforming(eff, self.config, kind, &self.algo.solver())?;
        if kind == BeamformingKind::Information {
            return Ok(sol);
        }

        let Beamformers::Matrices(w) = &sol.beamformers else {
            unreachable!("relaxed solutions are in matrix form")
        };
        relax::extract_beamformers(w, &sol.r0, eff, self.config, self.algo.rank_tol)
    }

    fn phase_step<R: Rng + ?Sized>(
        &self,
        bs: &BeamformingSolution,
        phi: &CVector,
        cu: CuType,
        rng: &mut R,
    ) -> Result<PhaseSolution> {
        let v = relax::solve_phase(self.channels, &bs.beamformers, &bs.r0, self.config, cu, &self.algo.solver())?;
        relax::gaussian_randomization(
            &v,
            self.channels,
            &bs.beamformers,
            &bs.r0,
            self.config,
            cu,
            phi,
            self.algo.rand_trials,
            rng,
        )
    }

    fn finish(
        self,
        beamforming: BeamformingSolution,
        phase: Option<PhaseSolution>,
        iterations: usize,
        converged: bool,
        note: Option<&'static str>,
    ) -> RunResult {
        let mut this = self;
        let eff = match &phase {
            Some(p) => EffectiveChannels::new(this.channels, &p.phi),
            None => Ok(EffectiveChannels::without_irs(this.channels)),
        };
        let eff = this.lift(eff)?;
        let m = relax::metrics(&eff, &beamforming.beamformers, &beamforming.r0, this.config);
        let metrics = this.lift(m)?;
        let audit = AuditReport::new(&metrics, this.config, this.config.cu_type, phase.as_ref().map(|p| &p.phi));
        Ok(RunRecord {
            scheme: this.scheme,
            cu_type: this.config.cu_type,
            trace: this.trace,
            phase_trace: this.phase_trace,
            beamforming,
            phase,
            iterations,
            converged,
            wall_time: this.start.elapsed(),
            metrics,
            audit,
            note,
        })
    }
}

fn alternate<R: Rng + ?Sized>(
    scheme: Scheme,
    kind: BeamformingKind,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    let mut run = Run::new(scheme, channels, config, algo)?;
    let cu = config.cu_type;
    let mut phi = match algo.init {
        InitStrategy::Isotropic => {
            let draw = init_phase(config.n, InitStrategy::Random, rng);
            let iso = isotropic_phase(channels, config, algo, &draw, rng);
            run.lift(iso)?.phi
        }
        s => init_phase(config.n, s, rng),
    };
    let eff = run.lift(EffectiveChannels::new(channels, &phi))?;
    let mut bs = run.lift(run.bs_step(&eff, kind))?;
    run.trace.push(bs.objective);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < algo.max_iters {
        iterations += 1;
        let step = run.phase_step(&bs, &phi, cu, rng);
        let phase = run.lift(step)?;
        run.phase_trace.push(phase.objective);
        phi = phase.phi;
        let eff = run.lift(EffectiveChannels::new(channels, &phi))?;
        bs = run.lift(run.bs_step(&eff, kind))?;
        let prev = *run.trace.last().expect("trace starts non-empty");
        run.trace.push(bs.objective);
        if algo.stop(prev, bs.objective) {
            converged = true;
            break;
        }
    }

    if kind == BeamformingKind::TypeII {
        let eff = run.lift(EffectiveChannels::new(channels, &phi))?;
        bs = run.lift(relax::drop_sensing_covariance(&bs, &eff, config))?;
    }
    let objective = bs.objective;
    run.finish(bs, Some(PhaseSolution { phi, objective }), iterations, converged, None)
}

/// Alternating optimization for Type-I users.
pub fn algorithm1<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    if config.cu_type != CuType::TypeI {
        return Err(Box::new(RunFailure {
            scheme: Scheme::Algorithm1,
            trace: Vec::new(),
            source: Error::InvalidInput("algorithm1 requires Type-I users".into()),
        }));
    }
    alternate(Scheme::Algorithm1, BeamformingKind::TypeI, channels, config, algo, rng)
}

/// Alternating optimization for Type-II users; the returned design has `R0 = 0`.
pub fn algorithm2<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    if config.cu_type != CuType::TypeII {
        return Err(Box::new(RunFailure {
            scheme: Scheme::Algorithm2,
            trace: Vec::new(),
            source: Error::InvalidInput("algorithm2 requires Type-II users".into()),
        }));
    }
    alternate(Scheme::Algorithm2, BeamformingKind::TypeII, channels, config, algo, rng)
}

/// The alternating loop with the sensing covariance pinned to zero.
pub fn benchmark_info_beamforming<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    alternate(Scheme::InfoBeamforming, BeamformingKind::Information, channels, config, algo, rng)
}

/// Final BS-side solve of the single-shot benchmarks.
fn final_bs(run: &Run<'_>, eff: &EffectiveChannels) -> Result<BeamformingSolution> {
    let kind = BeamformingKind::for_cu(run.config.cu_type);
    let bs = run.bs_step(eff, kind)?;
    if kind == BeamformingKind::TypeII {
        relax::drop_sensing_covariance(&bs, eff, run.config)
    } else {
        Ok(bs)
    }
}

/// Phases chosen to steer an isotropic transmission `(P0/M) I` toward the
/// targets, followed by one BS-side solve.
pub fn benchmark_separate_design<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    let mut run = Run::new(Scheme::SeparateDesign, channels, config, algo)?;
    let incumbent = init_phase(config.n, InitStrategy::Random, rng);
    let phase = isotropic_phase(channels, config, algo, &incumbent, rng);
    let phase = run.lift(phase)?;
    run.trace.push(phase.objective);
    run.phase_trace.push(phase.objective);
    let eff = run.lift(EffectiveChannels::new(channels, &phase.phi))?;
    let bs = run.lift(final_bs(&run, &eff))?;
    run.trace.push(bs.objective);
    let phase = PhaseSolution {
        phi: phase.phi,
        objective: bs.objective,
    };
    run.finish(bs, Some(phase), 1, true, Some("isotropic covariance (P0/M) I used for the phase step"))
}

fn isotropic_phase<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    incumbent: &CVector,
    rng: &mut R,
) -> Result<PhaseSolution> {
    let n = channels.n();
    let iso = CMatrix::identity(config.m, config.m) * num_complex::Complex64::new(config.p0 / config.m as f64, 0.0);
    let targets: Vec<CMatrix> = channels.steering.iter().map(|a| cascade(&channels.g, a)).collect();
    let lifted: Vec<CMatrix> = targets.iter().map(|b| lift_quadratic(b, None, &iso).0).collect();
    let scale = relax::lifted_scale(&lifted, (n + 1) as f64);

    let mut p = SdpProblem::new(vec![n + 1], 1, Sense::Maximize);
    p.set_objective(LinearForm::new().nonneg(0, 1.0));
    for (l, a) in lifted.into_iter().enumerate() {
        let f = LinearForm::new().block(0, a).nonneg(0, -scale);
        p.add_constraint(format!("target[{l}]"), f, Relation::Ge, 0.0);
    }
    for i in 0..=n {
        let mut e = CMatrix::zeros(n + 1, n + 1);
        e[(i, i)] = num_complex::Complex64::new(1.0, 0.0);
        p.add_constraint(format!("diag[{i}]"), LinearForm::new().block(0, e), Relation::Eq, 1.0);
    }
    let sol = sdp::solve_with(&p, &algo.solver())?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Subproblem {
            stage: "phase",
            status: sol.status,
        });
    }
    let v = hermitize(&sol.blocks[0]);
    relax::randomize_phases(&v, incumbent, algo.rand_trials, rng, |phi| {
        let psi = phi.map(|z| z.conj());
        let gain = targets
            .iter()
            .map(|b| quad_form(&iso, &(b * &psi)))
            .fold(f64::INFINITY, f64::min);
        (gain, true)
    })
}

/// Uniformly random phases held fixed, one BS-side solve.
pub fn benchmark_random_phase<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    let mut run = Run::new(Scheme::RandomPhase, channels, config, algo)?;
    let phi = init_phase(config.n, InitStrategy::Random, rng);
    let eff = run.lift(EffectiveChannels::new(channels, &phi))?;
    let bs = run.lift(final_bs(&run, &eff))?;
    run.trace.push(bs.objective);
    let phase = PhaseSolution {
        phi,
        objective: bs.objective,
    };
    run.finish(bs, Some(phase), 0, true, None)
}

/// BS-side solve with every IRS-reflected path removed.
pub fn benchmark_no_irs<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    _rng: &mut R,
) -> RunResult {
    let mut run = Run::new(Scheme::NoIrs, channels, config, algo)?;
    let eff = EffectiveChannels::without_irs(channels);
    let bs = run.lift(final_bs(&run, &eff))?;
    run.trace.push(bs.objective);
    run.finish(bs, None, 0, true, None)
}

/// Dispatches on `scheme`; the joint schemes require the matching user type.
pub fn run_scheme<R: Rng + ?Sized>(
    scheme: Scheme,
    channels: &ChannelSet,
    config: &ScenarioConfig,
    algo: &AlgoConfig,
    rng: &mut R,
) -> RunResult {
    match scheme {
        Scheme::Algorithm1 => algorithm1(channels, config, algo, rng),
        Scheme::Algorithm2 => algorithm2(channels, config, algo, rng),
        Scheme::InfoBeamforming => benchmark_info_beamforming(channels, config, algo, rng),
        Scheme::SeparateDesign => benchmark_separate_design(channels, config, algo, rng),
        Scheme::RandomPhase => benchmark_random_phase(channels, config, algo, rng),
        Scheme::NoIrs => benchmark_no_irs(channels, config, algo, rng),
    }
}
