//! Semidefinite relaxations of the BS-side and IRS-side subproblems, and the
//! maps from relaxed optima back to feasible designs.
//!
//! Phase variables are lifted as `ψ̄ = [ψ; 1]` with `ψ = conj(φ)`, so that a
//! reflected channel reads `G^H diag(u) ψ` and every quadratic metric becomes
//! `ψ̄^H A ψ̄ + c` for a Hermitian `A`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{check_phase, ChannelSet, CuType, EffectiveChannels, ScenarioConfig};
use crate::error::{invalid, Error, Result};
use crate::matrix::{
    hermitian_eig, hermitize, outer, project_psd, quad_form, real_trace, CMatrix, CVector,
    ComplexGaussianSampler,
};
use crate::sdp::{self, LinearForm, Relation, SdpProblem, SdpSolution, Sense, SolveStatus, SolverOptions};

/// `λ_max / tr` threshold below which a relaxed `W_k` counts as higher rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-4;
/// Relative slack tolerated when screening randomized phase candidates.
pub const CANDIDATE_TOL: f64 = 1e-9;
/// Audit thresholds (relative violation).
pub const AUDIT_POWER_TOL: f64 = 1e-8;
pub const AUDIT_TOL: f64 = 1e-6;
pub const AUDIT_MODULUS_TOL: f64 = 1e-12;

/// Which BS-side relaxation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeamformingKind {
    /// Sensing covariance `R0` present; CUs cancel its interference.
    TypeI,
    /// Sensing covariance `R0` present and counted as interference.
    TypeII,
    /// No sensing covariance (`R0 = 0`).
    Information,
}

impl BeamformingKind {
    pub fn for_cu(cu: CuType) -> Self {
        match cu {
            CuType::TypeI => BeamformingKind::TypeI,
            CuType::TypeII => BeamformingKind::TypeII,
        }
    }

    fn has_covariance(self) -> bool {
        self != BeamformingKind::Information
    }
}

/// Per-CU transmit beamformers, either extracted vectors or relaxed matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Beamformers {
    Vectors(Vec<CVector>),
    Matrices(Vec<CMatrix>),
}

impl Beamformers {
    pub fn len(&self) -> usize {
        match self {
            Beamformers::Vectors(w) => w.len(),
            Beamformers::Matrices(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `w_k w_k^H` or `W_k`.
    pub fn covariance(&self, k: usize) -> CMatrix {
        match self {
            Beamformers::Vectors(w) => outer(&w[k], &w[k]),
            Beamformers::Matrices(w) => w[k].clone(),
        }
    }

    /// `h^H W_k h`.
    pub fn gain(&self, k: usize, h: &CVector) -> f64 {
        match self {
            Beamformers::Vectors(w) => h.dotc(&w[k]).norm_sqr(),
            Beamformers::Matrices(w) => quad_form(&w[k], h),
        }
    }

    pub fn power(&self) -> f64 {
        match self {
            Beamformers::Vectors(w) => w.iter().map(|v| v.norm_squared()).sum(),
            Beamformers::Matrices(w) => w.iter().map(real_trace).sum(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Beamformers::Vectors(w) => w.first().map_or(0, |v| v.len()),
            Beamformers::Matrices(w) => w.first().map_or(0, |v| v.nrows()),
        }
    }
}

/// BS-side design: beamformers, sensing covariance and min target gain (W).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub beamformers: Beamformers,
    pub r0: CMatrix,
    pub objective: f64,
}

impl BeamformingSolution {
    /// Transmit covariance `R = R0 + Σ_k W_k`.
    pub fn covariance(&self) -> CMatrix {
        let mut r = self.r0.clone();
        for k in 0..self.beamformers.len() {
            r += self.beamformers.covariance(k);
        }
        hermitize(&r)
    }

    pub fn power(&self) -> f64 {
        real_trace(&self.r0) + self.beamformers.power()
    }
}

/// IRS phase vector and the min target gain it achieves (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub phi: CVector,
    pub objective: f64,
}

/// Direct (unlifted) evaluation of every design metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub beampattern: Vec<f64>,
    pub sinr_i: Vec<f64>,
    pub sinr_ii: Vec<f64>,
    pub clutter: Vec<f64>,
    /// Mean hermitized cross-correlation over target pairs (0 when `L = 1`).
    pub cross_corr: f64,
    pub power: f64,
}

impl Metrics {
    pub fn min_gain(&self) -> f64 {
        self.beampattern.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sinr(&self, cu: CuType) -> &[f64] {
        match cu {
            CuType::TypeI => &self.sinr_i,
            CuType::TypeII => &self.sinr_ii,
        }
    }
}

fn check_design(eff: &EffectiveChannels, bf: &Beamformers, r0: &CMatrix) -> Result<()> {
    let m = eff.m();
    if bf.len() != eff.cu.len() {
        return invalid(format!(
            "{} beamformers for {} users",
            bf.len(),
            eff.cu.len()
        ));
    }
    if (!bf.is_empty() && bf.dim() != m) || r0.nrows() != m || r0.ncols() != m {
        return invalid("beamformer dimensions do not match the BS array");
    }
    Ok(())
}

/// Mean of `Re(h_l^H R h_i)` over target pairs `l < i`.
fn mean_cross(targets: &[CVector], r: &CMatrix) -> f64 {
    let l = targets.len();
    if l < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for a in 0..l {
        let ra = r * &targets[a];
        for b in a + 1..l {
            acc += targets[b].dotc(&ra).re;
        }
    }
    acc * 2.0 / (l * (l - 1)) as f64
}

pub fn metrics(
    eff: &EffectiveChannels,
    bf: &Beamformers,
    r0: &CMatrix,
    config: &ScenarioConfig,
) -> Result<Metrics> {
    check_design(eff, bf, r0)?;
    let mut r = r0.clone();
    for k in 0..bf.len() {
        r += bf.covariance(k);
    }
    let r = hermitize(&r);
    let beampattern = eff.target.iter().map(|h| quad_form(&r, h)).collect();
    let clutter = eff.clutter.iter().map(|g| quad_form(&r, g)).collect();
    let k = bf.len();
    let mut sinr_i = Vec::with_capacity(k);
    let mut sinr_ii = Vec::with_capacity(k);
    for (u, h) in eff.cu.iter().enumerate() {
        let signal = bf.gain(u, h);
        let inter: f64 = (0..k).filter(|&j| j != u).map(|j| bf.gain(j, h)).sum();
        sinr_i.push(signal / (inter + config.sigma2));
        sinr_ii.push(signal / (inter + quad_form(r0, h) + config.sigma2));
    }
    Ok(Metrics {
        beampattern,
        sinr_i,
        sinr_ii,
        clutter,
        cross_corr: mean_cross(&eff.target, &r),
        power: real_trace(&r),
    })
}

/// Beampattern gain `h(θ)^H R h(θ)` toward an arbitrary angle; zero without IRS.
pub fn beampattern_gain(
    channels: &ChannelSet,
    phi: Option<&CVector>,
    theta: f64,
    r: &CMatrix,
    config: &ScenarioConfig,
) -> Result<f64> {
    let Some(phi) = phi else {
        return Ok(0.0);
    };
    let h = crate::channel::effective_target_channel(&channels.g, phi, theta, config.d_irs_over_lambda)?;
    Ok(quad_form(r, &h))
}

/// Largest relative violation per constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub power: f64,
    pub sinr: f64,
    pub clutter: f64,
    pub cross_corr: f64,
    /// `max |1 - |φ_n||`; zero when no IRS is present.
    pub unit_modulus: f64,
}

impl AuditReport {
    pub fn new(
        m: &Metrics,
        config: &ScenarioConfig,
        cu: CuType,
        phi: Option<&CVector>,
    ) -> Self {
        let power = (m.power - config.p0).max(0.0) / config.p0;
        let sinr = m
            .sinr(cu)
            .iter()
            .zip(&config.gamma)
            .map(|(s, g)| (g - s).max(0.0) / g)
            .fold(0.0, f64::max);
        let clutter = m
            .clutter
            .iter()
            .map(|c| (c - config.eta).max(0.0) / config.eta)
            .fold(0.0, f64::max);
        let cross_corr = if config.xi.is_finite() {
            (m.cross_corr - config.xi).max(0.0) / config.xi.abs().max(f64::MIN_POSITIVE)
        } else {
            0.0
        };
        let unit_modulus = phi.map_or(0.0, |p| {
            p.iter().map(|z| (1.0 - z.norm()).abs()).fold(0.0, f64::max)
        });
        Self {
            power,
            sinr,
            clutter,
            cross_corr,
            unit_modulus,
        }
    }

    pub fn passes(&self) -> bool {
        self.power <= AUDIT_POWER_TOL
            && self.sinr <= AUDIT_TOL
            && self.clutter <= AUDIT_TOL
            && self.cross_corr <= AUDIT_TOL
            && self.unit_modulus <= AUDIT_MODULUS_TOL
    }

    /// Componentwise maximum, for aggregating over runs.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            power: self.power.max(other.power),
            sinr: self.sinr.max(other.sinr),
            clutter: self.clutter.max(other.clutter),
            cross_corr: self.cross_corr.max(other.cross_corr),
            unit_modulus: self.unit_modulus.max(other.unit_modulus),
        }
    }
}

fn check_config(eff: &EffectiveChannels, config: &ScenarioConfig) -> Result<()> {
    config.validate()?;
    if eff.cu.len() != config.k
        || eff.target.len() != config.l()
        || eff.clutter.len() != config.q
        || eff.m() != config.m
    {
        return invalid("effective channels do not match the scenario dimensions");
    }
    Ok(())
}

fn cross_pair_matrix(targets: &[CVector]) -> CMatrix {
    let l = targets.len();
    let m = targets[0].len();
    let mut p = CMatrix::zeros(m, m);
    for a in 0..l {
        for b in a + 1..l {
            p += outer(&targets[b], &targets[a]);
        }
    }
    hermitize(&p) * Complex64::new(2.0 / (l * (l - 1)) as f64, 0.0)
}

/// `P0 max_l ‖h_l‖²`, an upper bound on every target gain (1 if all vanish).
pub fn beamforming_gain_scale(eff: &EffectiveChannels, config: &ScenarioConfig) -> f64 {
    let g = eff.target.iter().map(|h| h.norm_squared()).fold(0.0, f64::max) * config.p0;
    if g > 0.0 { g } else { 1.0 }
}

/// `(N+1) max_l ‖Ā_l‖_F`, an upper bound on every lifted target gain.
pub fn phase_gain_scale(forms: &AugmentedForms) -> f64 {
    let n1 = forms.rbar_target.first().map_or(1, |a| a.nrows()) as f64;
    lifted_scale(&forms.rbar_target, n1)
}

pub(crate) fn lifted_scale(targets: &[CMatrix], n1: f64) -> f64 {
    let g = targets.iter().map(|a| a.norm()).fold(0.0, f64::max) * n1;
    if g > 0.0 { g } else { 1.0 }
}

/// Block layout of the BS-side relaxation: `W_1..W_K`, then `R0` when present;
/// the epigraph variable `t` is nonnegative scalar 0, measured in units of
/// [`beamforming_gain_scale`].
pub fn build_beamforming_sdp(
    eff: &EffectiveChannels,
    config: &ScenarioConfig,
    kind: BeamformingKind,
) -> Result<SdpProblem> {
    check_config(eff, config)?;
    let k = config.k;
    let m = config.m;
    let nblocks = if kind.has_covariance() { k + 1 } else { k };
    let scale = beamforming_gain_scale(eff, config);
    let mut p = SdpProblem::new(vec![m; nblocks], 1, Sense::Maximize);
    p.set_objective(LinearForm::new().nonneg(0, 1.0));

    let on_all = |a: &CMatrix| {
        let mut f = LinearForm::new();
        for b in 0..nblocks {
            f.add_block(b, a.clone());
        }
        f
    };

    p.add_constraint("power", on_all(&CMatrix::identity(m, m)), Relation::Le, config.p0);

    for (u, h) in eff.cu.iter().enumerate() {
        let hh = outer(h, h);
        let mut f = LinearForm::new();
        for j in 0..k {
            let c = if j == u { 1.0 / config.gamma[u] } else { -1.0 };
            f.add_block(j, &hh * Complex64::new(c, 0.0));
        }
        if kind == BeamformingKind::TypeII {
            f.add_block(k, -&hh);
        }
        p.add_constraint(format!("sinr[{u}]"), f, Relation::Ge, config.sigma2);
    }

    for (q, g) in eff.clutter.iter().enumerate() {
        p.add_constraint(format!("clutter[{q}]"), on_all(&outer(g, g)), Relation::Le, config.eta);
    }

    if config.xi.is_finite() && eff.target.len() >= 2 {
        p.add_constraint("cross", on_all(&cross_pair_matrix(&eff.target)), Relation::Le, config.xi);
    }

    for (l, h) in eff.target.iter().enumerate() {
        let f = on_all(&outer(h, h)).nonneg(0, -scale);
        p.add_constraint(format!("target[{l}]"), f, Relation::Ge, 0.0);
    }
    Ok(p)
}

pub fn build_beamforming_sdp_type1(eff: &EffectiveChannels, config: &ScenarioConfig) -> Result<SdpProblem> {
    build_beamforming_sdp(eff, config, BeamformingKind::TypeI)
}

pub fn build_beamforming_sdp_type2(eff: &EffectiveChannels, config: &ScenarioConfig) -> Result<SdpProblem> {
    build_beamforming_sdp(eff, config, BeamformingKind::TypeII)
}

pub fn build_beamforming_sdp_info(eff: &EffectiveChannels, config: &ScenarioConfig) -> Result<SdpProblem> {
    build_beamforming_sdp(eff, config, BeamformingKind::Information)
}

fn require_solved(stage: &'static str, sol: &SdpSolution) -> Result<()> {
    if sol.status == SolveStatus::Optimal {
        Ok(())
    } else {
        Err(Error::Subproblem {
            stage,
            status: sol.status,
        })
    }
}

/// Matrix-form design read off a solved BS-side relaxation.
pub fn beamforming_from_sdp(
    sol: &SdpSolution,
    eff: &EffectiveChannels,
    config: &ScenarioConfig,
    kind: BeamformingKind,
) -> Result<BeamformingSolution> {
    let k = config.k;
    let expected = if kind.has_covariance() { k + 1 } else { k };
    if sol.blocks.len() != expected {
        return invalid("solution block count does not match the relaxation kind");
    }
    let w: Vec<CMatrix> = sol.blocks[..k].iter().map(hermitize).collect();
    let r0 = if kind.has_covariance() {
        hermitize(&sol.blocks[k])
    } else {
        CMatrix::zeros(config.m, config.m)
    };
    let beamformers = Beamformers::Matrices(w);
    let objective = metrics(eff, &beamformers, &r0, config)?.min_gain();
    Ok(BeamformingSolution {
        beamformers,
        r0,
        objective,
    })
}

/// Builds and solves the BS-side relaxation; non-optimal statuses are errors.
pub fn solve_beamforming(
    eff: &EffectiveChannels,
    config: &ScenarioConfig,
    kind: BeamformingKind,
    options: &SolverOptions,
) -> Result<BeamformingSolution> {
    let problem = build_beamforming_sdp(eff, config, kind)?;
    let sol = sdp::solve_with(&problem, options)?;
    require_solved("beamforming", &sol)?;
    beamforming_from_sdp(&sol, eff, config, kind)
}

/// Whether `λ_max(W) ≥ (1 - rank_tol) tr(W)`.
pub fn is_rank_one(w: &CMatrix, rank_tol: f64) -> Result<bool> {
    let eig = hermitian_eig(&hermitize(w))?;
    let tr = real_trace(w);
    Ok(tr <= 0.0 || eig.max_eigenvalue() >= (1.0 - rank_tol) * tr)
}

/// Vector-form design from relaxed `W_k`, `R0`.
///
/// Every `W_k` is replaced by `w̃_k = W_k h_k / sqrt(h_k^H W_k h_k)` and the
/// remainder `W_k - w̃_k w̃_k^H ⪰ 0` is folded into the sensing covariance. For
/// rank-one `W_k` this is the principal eigenvector scaled by `sqrt(λ)`; in
/// general it keeps `R`, every `h_k^H W_k h_k` and every constraint intact.
pub fn extract_beamformers(
    w: &[CMatrix],
    r0: &CMatrix,
    eff: &EffectiveChannels,
    config: &ScenarioConfig,
    rank_tol: f64,
) -> Result<BeamformingSolution> {
    if !(0.0..1.0).contains(&rank_tol) {
        return invalid(format!("rank_tol must lie in [0, 1), got {rank_tol}"));
    }
    check_design(eff, &Beamformers::Matrices(w.to_vec()), r0)?;
    let mut vectors = Vec::with_capacity(w.len());
    let mut rest = r0.clone();
    for (k, (wk, h)) in w.iter().zip(&eff.cu).enumerate() {
        let wk = hermitize(wk);
        let wh = &wk * h;
        let gain = h.dotc(&wh).re;
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::DegenerateSolution { cu: k, gain });
        }
        let v = wh.unscale(gain.sqrt());
        rest += &wk - outer(&v, &v);
        vectors.push(v);
    }
    let mut r0_new = hermitize(&rest);
    if hermitian_eig(&r0_new)?.min_eigenvalue() < 0.0 {
        r0_new = project_psd(&r0_new)?;
    }
    let vec_power: f64 = vectors.iter().map(|v| v.norm_squared()).sum();
    let total = vec_power + real_trace(&r0_new);
    if total > config.p0 {
        let room = (config.p0 - vec_power).max(0.0);
        let tr = real_trace(&r0_new);
        if tr > 0.0 {
            r0_new *= Complex64::new((room / tr).min(1.0), 0.0);
        }
    }
    let _ = rank_tol;
    let beamformers = Beamformers::Vectors(vectors);
    let objective = metrics(eff, &beamformers, &r0_new, config)?.min_gain();
    Ok(BeamformingSolution {
        beamformers,
        r0: r0_new,
        objective,
    })
}

/// Folds `R0` into the beamformers (`W_k + R0 / K`, `R0 = 0`) and audits the
/// result against the Type-II constraints.
pub fn drop_sensing_covariance(
    solution: &BeamformingSolution,
    eff: &EffectiveChannels,
    config: &ScenarioConfig,
) -> Result<BeamformingSolution> {
    let k = solution.beamformers.len();
    check_design(eff, &solution.beamformers, &solution.r0)?;
    if k == 0 {
        return invalid("no users to absorb the sensing covariance");
    }
    let share = solution.r0.unscale(k as f64);
    let w: Vec<CMatrix> = (0..k)
        .map(|j| hermitize(&(solution.beamformers.covariance(j) + &share)))
        .collect();
    let r0 = CMatrix::zeros(config.m, config.m);
    let beamformers = Beamformers::Matrices(w);
    let before = metrics(eff, &solution.beamformers, &solution.r0, config)?;
    let after = metrics(eff, &beamformers, &r0, config)?;
    let audit = AuditReport::new(&after, config, CuType::TypeII, None);
    let before_audit = AuditReport::new(&before, config, CuType::TypeII, None);
    let drift = (after.min_gain() - before.min_gain()).abs();
    let scale = before.min_gain().abs().max(f64::MIN_POSITIVE);
    if (!audit.passes() && audit.sinr > before_audit.sinr) || drift > 1e-9 * scale {
        return Err(Error::NumericalFailure(format!(
            "sensing covariance elimination failed: {audit:?}, objective drift {drift:e}"
        )));
    }
    Ok(BeamformingSolution {
        beamformers,
        r0,
        objective: after.min_gain(),
    })
}

/// `G^H diag(u)`, mapping `ψ` to the BS side.
pub fn cascade(g: &CMatrix, u: &CVector) -> CMatrix {
    let mut b = g.adjoint();
    for (n, &un) in u.iter().enumerate() {
        for x in b.column_mut(n).iter_mut() {
            *x *= un;
        }
    }
    b
}

/// `(A, c)` with `h^H S h = ψ̄^H A ψ̄ + c` for `h = B ψ + d`.
pub fn lift_quadratic(b: &CMatrix, d: Option<&CVector>, s: &CMatrix) -> (CMatrix, f64) {
    let n = b.ncols();
    let sb = s * b;
    let mut a = CMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&(b.adjoint() * &sb));
    let mut c = 0.0;
    if let Some(d) = d {
        let bsd = b.adjoint() * (s * d);
        a.view_mut((0, n), (n, 1)).copy_from(&bsd);
        a.view_mut((n, 0), (1, n)).copy_from(&bsd.adjoint());
        c = quad_form(s, d);
    }
    (hermitize(&a), c)
}

/// Lifted matrices and constants of the phase subproblem for fixed beamformers.
#[derive(Debug, Clone)]
pub struct AugmentedForms {
    pub rbar_target: Vec<CMatrix>,
    /// Averaged cross-correlation form over all target pairs (absent if `L < 2`).
    pub rbar_target_pair: Option<CMatrix>,
    /// `[k][j]`: lifted `h_k^H W_j h_k`.
    pub rbar_cu: Vec<Vec<CMatrix>>,
    pub rbar_clutter: Vec<CMatrix>,
    /// `[k]`: lifted `h_k^H R0 h_k`.
    pub fbar_cu: Vec<CMatrix>,
    /// Right-hand sides of the Type-I / Type-II SINR rows.
    pub c_i: Vec<f64>,
    pub c_ii: Vec<f64>,
    /// `η - g_bc^H R g_bc`.
    pub clutter_rhs: Vec<f64>,
}

impl AugmentedForms {
    pub fn new(
        channels: &ChannelSet,
        bf: &Beamformers,
        r0: &CMatrix,
        config: &ScenarioConfig,
    ) -> Result<Self> {
        let m = channels.m();
        let k = channels.k();
        if bf.len() != k || r0.nrows() != m || (!bf.is_empty() && bf.dim() != m) {
            return invalid("beamformers do not match the channel set");
        }
        if config.gamma.len() != k {
            return invalid("SINR thresholds do not match the user count");
        }
        let covs: Vec<CMatrix> = (0..k).map(|j| bf.covariance(j)).collect();
        let mut r = r0.clone();
        for c in &covs {
            r += c;
        }
        let r = hermitize(&r);

        let target_b: Vec<CMatrix> = channels
            .steering
            .iter()
            .map(|a| cascade(&channels.g, a))
            .collect();
        let rbar_target = target_b
            .iter()
            .map(|b| lift_quadratic(b, None, &r).0)
            .collect();
        let l = target_b.len();
        let rbar_target_pair = (l >= 2).then(|| {
            let n = channels.n();
            let mut acc = CMatrix::zeros(n, n);
            for a in 0..l {
                let rb = &r * &target_b[a];
                for c in a + 1..l {
                    let blk = hermitize(&(target_b[c].adjoint() * &rb));
                    acc += blk;
                }
            }
            let mut lifted = CMatrix::zeros(n + 1, n + 1);
            lifted
                .view_mut((0, 0), (n, n))
                .copy_from(&(acc * Complex64::new(2.0 / (l * (l - 1)) as f64, 0.0)));
            lifted
        });

        let mut rbar_cu = Vec::with_capacity(k);
        let mut fbar_cu = Vec::with_capacity(k);
        let mut c_i = Vec::with_capacity(k);
        let mut c_ii = Vec::with_capacity(k);
        for u in 0..k {
            let b = cascade(&channels.g, &channels.h_iu[u]);
            let d = &channels.h_bu[u];
            let mut row = Vec::with_capacity(k);
            let mut constant = 0.0;
            for (j, cov) in covs.iter().enumerate() {
                let (a, c) = lift_quadratic(&b, Some(d), cov);
                constant += if j == u { c / config.gamma[u] } else { -c };
                row.push(a);
            }
            let (f, cf) = lift_quadratic(&b, Some(d), r0);
            c_i.push(config.sigma2 - constant);
            c_ii.push(config.sigma2 - constant + cf);
            rbar_cu.push(row);
            fbar_cu.push(f);
        }

        let mut rbar_clutter = Vec::with_capacity(channels.q());
        let mut clutter_rhs = Vec::with_capacity(channels.q());
        for (ic, bc) in channels.g_ic.iter().zip(&channels.g_bc) {
            let b = cascade(&channels.g, ic);
            let (a, c) = lift_quadratic(&b, Some(bc), &r);
            rbar_clutter.push(a);
            clutter_rhs.push(config.eta - c);
        }

        Ok(Self {
            rbar_target,
            rbar_target_pair,
            rbar_cu,
            rbar_clutter,
            fbar_cu,
            c_i,
            c_ii,
            clutter_rhs,
        })
    }

    /// Lifted SINR form for user `u`.
    pub fn sinr_form(&self, u: usize, gamma: f64, cu: CuType) -> CMatrix {
        let mut a = &self.rbar_cu[u][u] * Complex64::new(1.0 / gamma, 0.0);
        for (j, r) in self.rbar_cu[u].iter().enumerate() {
            if j != u {
                a -= r;
            }
        }
        if cu == CuType::TypeII {
            a -= &self.fbar_cu[u];
        }
        a
    }

    pub fn sinr_rhs(&self, u: usize, cu: CuType) -> f64 {
        match cu {
            CuType::TypeI => self.c_i[u],
            CuType::TypeII => self.c_ii[u],
        }
    }
}

/// Epigraph relaxation over `V = ψ̄ψ̄^H` (block 0) with `t` as scalar 0,
/// measured in units of [`phase_gain_scale`].
pub fn build_phase_sdp(
    channels: &ChannelSet,
    bf: &Beamformers,
    r0: &CMatrix,
    config: &ScenarioConfig,
    cu: CuType,
) -> Result<SdpProblem> {
    config.validate()?;
    let forms = AugmentedForms::new(channels, bf, r0, config)?;
    let n = channels.n();
    let scale = phase_gain_scale(&forms);
    let mut p = SdpProblem::new(vec![n + 1], 1, Sense::Maximize);
    p.set_objective(LinearForm::new().nonneg(0, 1.0));
    for (l, a) in forms.rbar_target.iter().enumerate() {
        let f = LinearForm::new().block(0, a.clone()).nonneg(0, -scale);
        p.add_constraint(format!("target[{l}]"), f, Relation::Ge, 0.0);
    }
    for u in 0..channels.k() {
        let f = LinearForm::new().block(0, forms.sinr_form(u, config.gamma[u], cu));
        p.add_constraint(format!("sinr[{u}]"), f, Relation::Ge, forms.sinr_rhs(u, cu));
    }
    for (q, a) in forms.rbar_clutter.iter().enumerate() {
        let f = LinearForm::new().block(0, a.clone());
        p.add_constraint(format!("clutter[{q}]"), f, Relation::Le, forms.clutter_rhs[q]);
    }
    if config.xi.is_finite() {
        if let Some(a) = &forms.rbar_target_pair {
            p.add_constraint("cross", LinearForm::new().block(0, a.clone()), Relation::Le, config.xi);
        }
    }
    for i in 0..=n {
        let mut e = CMatrix::zeros(n + 1, n + 1);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        p.add_constraint(format!("diag[{i}]"), LinearForm::new().block(0, e), Relation::Eq, 1.0);
    }
    Ok(p)
}

/// Builds and solves the phase relaxation, returning the lifted matrix `V*`.
pub fn solve_phase(
    channels: &ChannelSet,
    bf: &Beamformers,
    r0: &CMatrix,
    config: &ScenarioConfig,
    cu: CuType,
    options: &SolverOptions,
) -> Result<CMatrix> {
    let problem = build_phase_sdp(channels, bf, r0, config, cu)?;
    let sol = sdp::solve_with(&problem, options)?;
    require_solved("phase", &sol)?;
    Ok(hermitize(&sol.blocks[0]))
}

/// `ψ̄ = [conj(φ); 1]`.
pub fn lift_phase(phi: &CVector) -> CVector {
    let n = phi.len();
    CVector::from_fn(n + 1, |i, _| {
        if i < n {
            phi[i].conj()
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Unit-modulus phase vector from a lifted draw: `φ_n = conj(e^{j arg(r_n / r_{N+1})})`.
pub fn phase_from_lifted(r: &CVector) -> CVector {
    let n = r.len() - 1;
    let anchor = r[n];
    CVector::from_fn(n, |i, _| {
        let z = r[i] / anchor;
        let theta = if z.is_finite() { z.arg() } else { 0.0 };
        Complex64::from_polar(1.0, -theta)
    })
}

/// Direct evaluation of the phase subproblem at candidate phases.
pub struct PhaseScreen<'a> {
    config: &'a ScenarioConfig,
    cu: CuType,
    bf: &'a Beamformers,
    r0: &'a CMatrix,
    r: CMatrix,
    target: Vec<CMatrix>,
    users: Vec<(CMatrix, &'a CVector)>,
    clutter: Vec<(CMatrix, &'a CVector)>,
}

impl<'a> PhaseScreen<'a> {
    pub fn new(
        channels: &'a ChannelSet,
        bf: &'a Beamformers,
        r0: &'a CMatrix,
        config: &'a ScenarioConfig,
        cu: CuType,
    ) -> Result<Self> {
        if bf.len() != channels.k() || r0.nrows() != channels.m() {
            return invalid("beamformers do not match the channel set");
        }
        let mut r = r0.clone();
        for k in 0..bf.len() {
            r += bf.covariance(k);
        }
        Ok(Self {
            config,
            cu,
            bf,
            r0,
            r: hermitize(&r),
            target: channels.steering.iter().map(|a| cascade(&channels.g, a)).collect(),
            users: channels
                .h_iu
                .iter()
                .zip(&channels.h_bu)
                .map(|(iu, bu)| (cascade(&channels.g, iu), bu))
                .collect(),
            clutter: channels
                .g_ic
                .iter()
                .zip(&channels.g_bc)
                .map(|(ic, bc)| (cascade(&channels.g, ic), bc))
                .collect(),
        })
    }

    /// `(min target gain, feasible)` at `φ`.
    pub fn evaluate(&self, phi: &CVector) -> (f64, bool) {
        let psi = phi.map(|z| z.conj());
        let targets: Vec<CVector> = self.target.iter().map(|b| b * &psi).collect();
        let gain = targets
            .iter()
            .map(|h| quad_form(&self.r, h))
            .fold(f64::INFINITY, f64::min);
        let tol = CANDIDATE_TOL;
        let k = self.bf.len();
        for (u, (b, d)) in self.users.iter().enumerate() {
            let h = b * &psi + *d;
            let signal = self.bf.gain(u, &h);
            let mut inter: f64 = (0..k).filter(|&j| j != u).map(|j| self.bf.gain(j, &h)).sum();
            if self.cu == CuType::TypeII {
                inter += quad_form(self.r0, &h);
            }
            let sinr = signal / (inter + self.config.sigma2);
            if sinr < self.config.gamma[u] * (1.0 - tol) {
                return (gain, false);
            }
        }
        for (b, d) in &self.clutter {
            let g = b * &psi + *d;
            if quad_form(&self.r, &g) > self.config.eta * (1.0 + tol) {
                return (gain, false);
            }
        }
        if self.config.xi.is_finite() {
            let cross = mean_cross(&targets, &self.r);
            if cross > self.config.xi + tol * self.config.xi.abs() {
                return (gain, false);
            }
        }
        (gain, true)
    }
}

/// Draws `trials` candidates from `CN(0, V*)`, keeping the best one that
/// satisfies every phase-subproblem constraint; falls back to `incumbent`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_randomization<R: Rng + ?Sized>(
    v_star: &CMatrix,
    channels: &ChannelSet,
    bf: &Beamformers,
    r0: &CMatrix,
    config: &ScenarioConfig,
    cu: CuType,
    incumbent: &CVector,
    trials: usize,
    rng: &mut R,
) -> Result<PhaseSolution> {
    let n = channels.n();
    if v_star.nrows() != n + 1 || v_star.ncols() != n + 1 {
        return invalid(format!(
            "lifted matrix is {}x{}, expected {}x{}",
            v_star.nrows(),
            v_star.ncols(),
            n + 1,
            n + 1
        ));
    }
    check_phase(&channels.g, incumbent)?;
    let screen = PhaseScreen::new(channels, bf, r0, config, cu)?;
    randomize_phases(v_star, incumbent, trials, rng, |phi| screen.evaluate(phi))
}

/// Gaussian randomization around `V*` with a caller-supplied evaluator
/// returning `(objective, feasible)`. The incumbent is kept unless a feasible
/// draw is strictly better; ties favour the earliest draw.
pub fn randomize_phases<R, F>(
    v_star: &CMatrix,
    incumbent: &CVector,
    trials: usize,
    rng: &mut R,
    evaluate: F,
) -> Result<PhaseSolution>
where
    R: Rng + ?Sized,
    F: Fn(&CVector) -> (f64, bool),
{
    if v_star.nrows() != incumbent.len() + 1 {
        return invalid("lifted matrix does not match the incumbent length");
    }
    let (inc_gain, _) = evaluate(incumbent);
    let mut best = PhaseSolution {
        phi: incumbent.clone(),
        objective: inc_gain,
    };
    let cov = project_psd(&hermitize(v_star))?;
    let sampler = ComplexGaussianSampler::new(&cov)?;
    for _ in 0..trials {
        let r = sampler.sample(rng);
        let phi = phase_from_lifted(&r);
        let (gain, feasible) = evaluate(&phi);
        if feasible && gain > best.objective {
            best = PhaseSolution {
                phi,
                objective: gain,
            };
        }
    }
    Ok(best)
}
