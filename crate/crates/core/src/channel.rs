//! Scenario geometry and channel generation.
//!
//! Links are Rician with geometry-derived line-of-sight components and
//! log-distance path loss `K0 (d/d0)^-α`. Arrays are uniform linear arrays;
//! the LoS response of a node pair depends only on the sine of the direction
//! between them (`Δy / d`). There is no direct BS→target link: targets are
//! reachable only through the IRS.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{standard_complex_normal, CMatrix, CVector};

/// Whether a communication user can cancel the dedicated sensing signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CuType {
    /// Cancels the sensing signal; `R0` does not enter the SINR denominator.
    #[serde(rename = "I")]
    TypeI,
    /// Cannot cancel it; `h^H R0 h` is extra interference.
    #[serde(rename = "II")]
    TypeII,
}

impl std::fmt::Display for CuType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CuType::TypeI => write!(f, "I"),
            CuType::TypeII => write!(f, "II"),
        }
    }
}

/// Path-loss exponents per link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossExponents {
    pub irs_clutter: f64,
    pub irs_cu: f64,
    pub bs_irs: f64,
    pub bs_cu: f64,
    pub bs_clutter: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            irs_clutter: 2.5,
            irs_cu: 2.5,
            bs_irs: 2.2,
            bs_cu: 3.5,
            bs_clutter: 3.5,
        }
    }
}

/// Planar node layout. Users sit on a circle around the BS, clutters in an
/// annulus around the IRS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_xy: [f64; 2],
    pub irs_xy: [f64; 2],
    pub cu_distance_m: f64,
    pub clutter_distance_range_m: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_xy: [0.0, 0.0],
            irs_xy: [20.0, 2.0],
            cu_distance_m: 10.0,
            clutter_distance_range_m: [12.0, 15.0],
        }
    }
}

/// All scalar parameters of one scenario, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub m: usize,
    /// IRS elements.
    pub n: usize,
    /// Communication users.
    pub k: usize,
    /// Clutters.
    pub q: usize,
    /// Transmit power budget (W).
    pub p0: f64,
    /// Receiver noise power per user (W).
    pub sigma2: f64,
    /// Per-user SINR thresholds (linear), length `k`.
    pub gamma: Vec<f64>,
    /// Per-clutter interference threshold (W).
    pub eta: f64,
    /// Mean cross-correlation threshold (W); `+∞` disables the constraint.
    pub xi: f64,
    /// Target directions w.r.t. the IRS (radians); their count is `L`.
    pub target_angles: Vec<f64>,
    pub d_irs_over_lambda: f64,
    pub rician_factor: f64,
    pub exponents: PathLossExponents,
    pub k0_db: f64,
    pub d0: f64,
    pub geometry: Geometry,
    pub cu_type: CuType,
    pub seed: u64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

impl Default for ScenarioConfig {
    /// Full-scale simulation setup: M=8, N=64, K=4, Q=2, five targets at
    /// -60°..60°, P0 = 0.5 W, σ² = -80 dBm, η = 0.1 μW, Γ = 10 dB, ξ = ∞.
    fn default() -> Self {
        Self {
            m: 8,
            n: 64,
            k: 4,
            q: 2,
            p0: 0.5,
            sigma2: dbm_to_watt(-80.0),
            gamma: vec![db_to_linear(10.0); 4],
            eta: 0.1e-6,
            xi: f64::INFINITY,
            target_angles: [-60.0f64, -30.0, 0.0, 30.0, 60.0]
                .iter()
                .map(|d| d.to_radians())
                .collect(),
            d_irs_over_lambda: 0.5,
            rician_factor: 0.5,
            exponents: PathLossExponents::default(),
            k0_db: -30.0,
            d0: 1.0,
            geometry: Geometry::default(),
            cu_type: CuType::TypeI,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Small instance used by tests and fast presets: M=4, N=12, K=2, L=3, Q=1.
    pub fn desk() -> Self {
        Self {
            m: 4,
            n: 12,
            k: 2,
            q: 1,
            gamma: vec![db_to_linear(10.0); 2],
            target_angles: [-30.0f64, 0.0, 30.0].iter().map(|d| d.to_radians()).collect(),
            ..Self::default()
        }
    }

    /// Number of targets.
    pub fn l(&self) -> usize {
        self.target_angles.len()
    }

    /// Replaces the user count and broadcasts the first SINR threshold.
    pub fn with_users(mut self, k: usize) -> Self {
        let g = self.gamma.first().copied().unwrap_or(db_to_linear(10.0));
        self.k = k;
        self.gamma = vec![g; k];
        self
    }

    pub fn with_gamma_db(mut self, gamma_db: f64) -> Self {
        self.gamma = vec![db_to_linear(gamma_db); self.k];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return invalid(format!("M must be > 1, got {}", self.m));
        }
        if self.n < 1 {
            return invalid("N must be >= 1");
        }
        if self.k == 0 {
            return invalid("K must be >= 1");
        }
        if self.target_angles.is_empty() {
            return invalid("at least one target angle is required");
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return invalid(format!("P0 must be positive and finite, got {}", self.p0));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return invalid(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.gamma.len() != self.k {
            return invalid(format!(
                "gamma has {} entries, expected K = {}",
                self.gamma.len(),
                self.k
            ));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0)) {
            return invalid("every SINR threshold must be positive");
        }
        if !(self.eta > 0.0) {
            return invalid(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.xi > 0.0) {
            return invalid(format!("xi must be positive (or +inf), got {}", self.xi));
        }
        for &theta in &self.target_angles {
            if !(theta > -PI / 2.0 && theta < PI / 2.0) {
                return invalid(format!(
                    "target angle {:.3} deg outside (-90, 90)",
                    theta.to_degrees()
                ));
            }
        }
        if !(self.d_irs_over_lambda > 0.0) {
            return invalid("d_irs_over_lambda must be positive");
        }
        if !(self.rician_factor >= 0.0) {
            return invalid("rician factor must be nonnegative");
        }
        if !(self.d0 > 0.0) {
            return invalid("reference distance d0 must be positive");
        }
        let g = &self.geometry;
        if !(g.cu_distance_m > 0.0) {
            return invalid("cu_distance_m must be positive");
        }
        let [lo, hi] = g.clutter_distance_range_m;
        if !(lo > 0.0 && hi >= lo) {
            return invalid(format!("invalid clutter distance range [{lo}, {hi}]"));
        }
        if distance(g.bs_xy, g.irs_xy) <= 0.0 {
            return invalid("BS and IRS must not coincide");
        }
        Ok(())
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Sine of the direction from `from` to `to`, relative to the array broadside.
fn direction_sine(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]) / distance(from, to)
}

/// ULA response with entries `exp(j 2π ratio n s)` for `s = sin θ`.
pub(crate) fn ula_response(n: usize, ratio: f64, sine: f64) -> CVector {
    CVector::from_iterator(
        n,
        (0..n).map(|i| Complex64::from_polar(1.0, 2.0 * PI * ratio * i as f64 * sine)),
    )
}

/// IRS steering vector toward `theta` (radians, in `(-π/2, π/2)`).
pub fn steering_vector(theta: f64, n: usize, ratio: f64) -> Result<CVector> {
    if !(theta > -PI / 2.0 && theta < PI / 2.0) {
        return invalid(format!("steering angle {theta} outside (-pi/2, pi/2)"));
    }
    Ok(ula_response(n, ratio, theta.sin()))
}

/// Linear gain `10^(K0_dB/10) (d/d0)^-α`.
pub fn path_loss(d: f64, alpha: f64, k0_db: f64, d0: f64) -> Result<f64> {
    if !(d > 0.0) || !(d0 > 0.0) {
        return invalid(format!("path loss needs positive distances, got d={d}, d0={d0}"));
    }
    Ok(db_to_linear(k0_db) * (d / d0).powf(-alpha))
}

/// `sqrt(gain) (sqrt(κ/(1+κ)) los + sqrt(1/(1+κ)) H_nlos)` with `H_nlos` i.i.d. `CN(0,1)`.
pub fn rician_channel<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rician_factor: f64,
    gain: f64,
    los: &CMatrix,
    rng: &mut R,
) -> Result<CMatrix> {
    if los.nrows() != rows || los.ncols() != cols {
        return invalid(format!(
            "LoS component is {}x{}, expected {rows}x{cols}",
            los.nrows(),
            los.ncols()
        ));
    }
    if !(gain >= 0.0) || !(rician_factor >= 0.0) {
        return invalid("gain and Rician factor must be nonnegative");
    }
    let nlos = standard_complex_normal(rows * cols, rng);
    let los_w = (rician_factor / (1.0 + rician_factor)).sqrt();
    let nlos_w = (1.0 / (1.0 + rician_factor)).sqrt();
    let amp = gain.sqrt();
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        // column-major draw order matches nalgebra storage
        (los[(i, j)] * los_w + nlos[i + j * rows] * nlos_w) * amp
    }))
}

fn rician_vector<R: Rng + ?Sized>(
    rician_factor: f64,
    gain: f64,
    los: &CVector,
    rng: &mut R,
) -> Result<CVector> {
    let n = los.len();
    let mat = CMatrix::from_column_slice(n, 1, los.as_slice());
    let h = rician_channel(n, 1, rician_factor, gain, &mat, rng)?;
    Ok(CVector::from_column_slice(h.as_slice()))
}

/// Random node positions drawn for one scenario realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub cu_xy: Vec<[f64; 2]>,
    pub clutter_xy: Vec<[f64; 2]>,
}

impl Placement {
    pub fn draw<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Self {
        let g = &config.geometry;
        let cu_xy = (0..config.k)
            .map(|_| {
                let a = rng.random_range(0.0..2.0 * PI);
                [
                    g.bs_xy[0] + g.cu_distance_m * a.cos(),
                    g.bs_xy[1] + g.cu_distance_m * a.sin(),
                ]
            })
            .collect();
        let [lo, hi] = g.clutter_distance_range_m;
        let clutter_xy = (0..config.q)
            .map(|_| {
                let a = rng.random_range(0.0..2.0 * PI);
                let d = if hi > lo { rng.random_range(lo..hi) } else { lo };
                [g.irs_xy[0] + d * a.cos(), g.irs_xy[1] + d * a.sin()]
            })
            .collect();
        Self { cu_xy, clutter_xy }
    }
}

/// Every channel quantity of one scenario realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS→IRS, `N×M`.
    pub g: CMatrix,
    /// BS→CU, one `M`-vector per user.
    pub h_bu: Vec<CVector>,
    /// IRS→CU, one `N`-vector per user.
    pub h_iu: Vec<CVector>,
    /// BS→clutter, one `M`-vector per clutter.
    pub g_bc: Vec<CVector>,
    /// IRS→clutter, one `N`-vector per clutter.
    pub g_ic: Vec<CVector>,
    /// IRS steering vector per target.
    pub steering: Vec<CVector>,
    pub placement: Placement,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> usize {
        self.h_bu.len()
    }

    pub fn q(&self) -> usize {
        self.g_bc.len()
    }

    pub fn l(&self) -> usize {
        self.steering.len()
    }
}

/// Draws geometry and all Rician links of a scenario.
///
/// Draw order is fixed (placement, `G`, per-user `h_bu`/`h_iu`, per-clutter
/// `g_bc`/`g_ic`) so a seeded generator reproduces the set bitwise.
pub fn build_channels<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet> {
    config.validate()?;
    let placement = Placement::draw(config, rng);
    let geo = &config.geometry;
    let (m, n) = (config.m, config.n);
    let kappa = config.rician_factor;
    let ratio = config.d_irs_over_lambda;
    let ex = &config.exponents;
    let pl = |d: f64, alpha: f64| path_loss(d, alpha, config.k0_db, config.d0);
    // BS array uses half-wavelength spacing.
    let bs_resp = |to: [f64; 2]| ula_response(m, 0.5, direction_sine(geo.bs_xy, to));
    let irs_resp = |to: [f64; 2]| ula_response(n, ratio, direction_sine(geo.irs_xy, to));

    let g_los = irs_resp(geo.bs_xy) * bs_resp(geo.irs_xy).adjoint();
    let g = rician_channel(
        n,
        m,
        kappa,
        pl(distance(geo.bs_xy, geo.irs_xy), ex.bs_irs)?,
        &g_los,
        rng,
    )?;

    let mut h_bu = Vec::with_capacity(config.k);
    let mut h_iu = Vec::with_capacity(config.k);
    for &cu in &placement.cu_xy {
        h_bu.push(rician_vector(kappa, pl(distance(geo.bs_xy, cu), ex.bs_cu)?, &bs_resp(cu), rng)?);
        h_iu.push(rician_vector(
            kappa,
            pl(distance(geo.irs_xy, cu), ex.irs_cu)?,
            &irs_resp(cu),
            rng,
        )?);
    }
    let mut g_bc = Vec::with_capacity(config.q);
    let mut g_ic = Vec::with_capacity(config.q);
    for &cl in &placement.clutter_xy {
        g_bc.push(rician_vector(
            kappa,
            pl(distance(geo.bs_xy, cl), ex.bs_clutter)?,
            &bs_resp(cl),
            rng,
        )?);
        g_ic.push(rician_vector(
            kappa,
            pl(distance(geo.irs_xy, cl), ex.irs_clutter)?,
            &irs_resp(cl),
            rng,
        )?);
    }
    let steering = config
        .target_angles
        .iter()
        .map(|&t| steering_vector(t, n, ratio))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSet {
        g,
        h_bu,
        h_iu,
        g_bc,
        g_ic,
        steering,
        placement,
    })
}

/// Unit-modulus slack accepted for IRS phase vectors.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

pub(crate) fn check_phase(g: &CMatrix, phi: &CVector) -> Result<()> {
    if phi.len() != g.nrows() {
        return invalid(format!(
            "phase vector has {} entries, IRS has {}",
            phi.len(),
            g.nrows()
        ));
    }
    if let Some((i, z)) = phi
        .iter()
        .enumerate()
        .find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
    {
        return invalid(format!("phase entry {i} has modulus {}", z.norm()));
    }
    Ok(())
}

/// `G^H Φ^H u` with `Φ = diag(φ)`.
fn reflected(g: &CMatrix, phi: &CVector, u: &CVector) -> Result<CVector> {
    check_phase(g, phi)?;
    if u.len() != g.nrows() {
        return invalid(format!(
            "IRS-side vector has {} entries, IRS has {}",
            u.len(),
            g.nrows()
        ));
    }
    let scaled = phi.zip_map(u, |p, x| p.conj() * x);
    Ok(g.adjoint() * scaled)
}

fn add_direct(v: CVector, direct: &CVector) -> Result<CVector> {
    if direct.len() != v.len() {
        return invalid(format!(
            "direct link has {} entries, BS has {}",
            direct.len(),
            v.len()
        ));
    }
    Ok(v + direct)
}

/// `h_CU = G^H Φ^H h_iu + h_bu`.
pub fn effective_cu_channel(
    g: &CMatrix,
    phi: &CVector,
    h_iu: &CVector,
    h_bu: &CVector,
) -> Result<CVector> {
    add_direct(reflected(g, phi, h_iu)?, h_bu)
}

/// `h_target = G^H Φ^H α(θ)`.
pub fn effective_target_channel(
    g: &CMatrix,
    phi: &CVector,
    theta: f64,
    ratio: f64,
) -> Result<CVector> {
    let a = steering_vector(theta, g.nrows(), ratio)?;
    reflected(g, phi, &a)
}

/// `g_clutter = G^H Φ^H g_ic + g_bc`.
pub fn effective_clutter_channel(
    g: &CMatrix,
    phi: &CVector,
    g_ic: &CVector,
    g_bc: &CVector,
) -> Result<CVector> {
    add_direct(reflected(g, phi, g_ic)?, g_bc)
}

/// Effective BS-side channels for one IRS state.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub cu: Vec<CVector>,
    pub target: Vec<CVector>,
    pub clutter: Vec<CVector>,
}

impl EffectiveChannels {
    pub fn new(channels: &ChannelSet, phi: &CVector) -> Result<Self> {
        let cu = channels
            .h_iu
            .iter()
            .zip(&channels.h_bu)
            .map(|(iu, bu)| effective_cu_channel(&channels.g, phi, iu, bu))
            .collect::<Result<_>>()?;
        let target = channels
            .steering
            .iter()
            .map(|a| reflected(&channels.g, phi, a))
            .collect::<Result<_>>()?;
        let clutter = channels
            .g_ic
            .iter()
            .zip(&channels.g_bc)
            .map(|(ic, bc)| effective_clutter_channel(&channels.g, phi, ic, bc))
            .collect::<Result<_>>()?;
        Ok(Self { cu, target, clutter })
    }

    /// IRS removed (`Φ = 0`): only direct links remain and targets are dark.
    pub fn without_irs(channels: &ChannelSet) -> Self {
        let m = channels.m();
        Self {
            cu: channels.h_bu.clone(),
            target: vec![CVector::zeros(m); channels.l()],
            clutter: channels.g_bc.clone(),
        }
    }

    pub fn m(&self) -> usize {
        self.cu.first().map_or(0, |h| h.len())
    }
}

/// Phase vector `exp(j θ_n)`.
pub fn phases_to_vector(angles: &[f64]) -> CVector {
    CVector::from_iterator(angles.len(), angles.iter().map(|&a| Complex64::from_polar(1.0, a)))
}
