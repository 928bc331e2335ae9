//! Experiment description: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use irs_isac::altopt::{AlgoConfig, InitStrategy, Scheme};
use irs_isac::channel::{db_to_linear, dbm_to_watt, CuType, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {msg}")]
    Invalid { field: &'static str, msg: String },
}

fn bad<T>(field: &'static str, msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError::Invalid {
        field,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "gamma_dB")]
    GammaDb,
    Q,
    P0,
    N,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::GammaDb => "gamma_dB",
            SweepVar::Q => "Q",
            SweepVar::P0 => "P0",
            SweepVar::N => "N",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepVar::Q | SweepVar::N)
    }

    /// Writes `value` into `config`; `P0` is in W.
    pub fn apply(self, config: &mut ScenarioConfig, value: f64) {
        match self {
            SweepVar::GammaDb => config.gamma = vec![db_to_linear(value); config.k],
            SweepVar::Q => config.q = value as usize,
            SweepVar::P0 => config.p0 = value,
            SweepVar::N => config.n = value as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSystem {
    M: Option<usize>,
    N: Option<usize>,
    K: Option<usize>,
    L: Option<usize>,
    Q: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawPower {
    P0_W: Option<f64>,
    sigma2_dBm: Option<f64>,
    eta_uW: Option<f64>,
    /// W; absent or null disables the cross-correlation constraint.
    xi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GammaDb {
    Common(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSinr {
    gamma_dB: Option<GammaDb>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTargets {
    angles_deg: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    bs_xy: Option<[f64; 2]>,
    irs_xy: Option<[f64; 2]>,
    cu_distance_m: Option<f64>,
    clutter_distance_range_m: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    irs_clutter: Option<f64>,
    irs_cu: Option<f64>,
    bs_irs: Option<f64>,
    bs_cu: Option<f64>,
    bs_clutter: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawChannel {
    rician_factor: Option<f64>,
    exponents: Option<RawExponents>,
    K0_dB: Option<f64>,
    d_irs_over_lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgo {
    cu_type: Option<CuType>,
    max_iters: Option<usize>,
    eps: Option<f64>,
    relative_stop: Option<bool>,
    rand_trials: Option<usize>,
    rank_tol: Option<f64>,
    sdp_tol: Option<f64>,
    sdp_max_iters: Option<usize>,
    init: Option<InitStrategy>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    scenario: Option<String>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    power: RawPower,
    #[serde(default)]
    sinr: RawSinr,
    #[serde(default)]
    targets: RawTargets,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    algo: RawAlgo,
    sweep: Option<Sweep>,
    schemes: Option<Vec<Scheme>>,
    seeds: Option<Vec<u64>>,
    output: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub scenario: String,
    /// Scenario before sweep values are applied; `cu_type` applies to the
    /// benchmark schemes.
    pub base: ScenarioConfig,
    pub algo: AlgoConfig,
    pub sweep: Option<Sweep>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Cells in run order: sweep value (if any), then scheme, then seed.
    pub fn cells(&self) -> Vec<(Option<f64>, Scheme, u64)> {
        let values: Vec<Option<f64>> = match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for v in values {
            for &scheme in &self.schemes {
                for &seed in &self.seeds {
                    out.push((v, scheme, seed));
                }
            }
        }
        out
    }

    /// Scenario of one cell. The joint designs fix their own user type.
    pub fn scenario_for(&self, sweep_value: Option<f64>, scheme: Scheme, seed: u64) -> ScenarioConfig {
        let mut config = self.base.clone();
        if let (Some(s), Some(v)) = (&self.sweep, sweep_value) {
            s.var.apply(&mut config, v);
        }
        config.seed = seed;
        config.cu_type = match scheme {
            Scheme::Algorithm1 => CuType::TypeI,
            Scheme::Algorithm2 => CuType::TypeII,
            _ => config.cu_type,
        };
        config
    }

    /// Caps `N ≤ 16` and randomization trials at 200.
    pub fn make_fast(&mut self) {
        const MAX_N: usize = 16;
        const MAX_TRIALS: usize = 200;
        self.base.n = self.base.n.min(MAX_N);
        self.algo.rand_trials = self.algo.rand_trials.min(MAX_TRIALS);
        if let Some(s) = &mut self.sweep {
            if s.var == SweepVar::N {
                s.values.retain(|&v| v <= MAX_N as f64);
                if s.values.is_empty() {
                    s.values.push(MAX_N as f64);
                }
            }
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ExperimentSpec, SpecError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    from_value(value)
}

pub fn from_value(value: serde_json::Value) -> Result<ExperimentSpec, SpecError> {
    let raw: RawSpec = serde_json::from_value(value)?;
    build(raw)
}

fn positive(field: &'static str, v: f64) -> Result<f64, SpecError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bad(field, format!("must be positive and finite, got {v}"))
    }
}

fn build(raw: RawSpec) -> Result<ExperimentSpec, SpecError> {
    let mut c = ScenarioConfig::default();
    let sys = raw.system;
    c.m = sys.M.unwrap_or(c.m);
    if c.m < 2 {
        return bad("system.M", format!("must be at least 2, got {}", c.m));
    }
    c.n = sys.N.unwrap_or(c.n);
    if c.n == 0 {
        return bad("system.N", "must be at least 1");
    }
    c.k = sys.K.unwrap_or(c.k);
    if c.k == 0 {
        return bad("system.K", "must be at least 1");
    }
    c.q = sys.Q.unwrap_or(c.q);

    if let Some(angles) = raw.targets.angles_deg {
        if angles.is_empty() {
            return bad("targets.angles_deg", "must not be empty");
        }
        if let Some(a) = angles.iter().find(|a| !(a.abs() < 90.0)) {
            return bad("targets.angles_deg", format!("{a} lies outside (-90, 90)"));
        }
        c.target_angles = angles.iter().map(|d| d.to_radians()).collect();
    }
    if let Some(l) = sys.L {
        if l != c.target_angles.len() {
            return bad(
                "system.L",
                format!("{l} does not match the {} target angles", c.target_angles.len()),
            );
        }
    }

    let pw = raw.power;
    if let Some(p) = pw.P0_W {
        c.p0 = positive("power.P0_W", p)?;
    }
    if let Some(s) = pw.sigma2_dBm {
        if !s.is_finite() {
            return bad("power.sigma2_dBm", "must be finite");
        }
        c.sigma2 = dbm_to_watt(s);
    }
    if let Some(e) = pw.eta_uW {
        c.eta = positive("power.eta_uW", e)? * 1e-6;
    }
    c.xi = match pw.xi {
        Some(x) => positive("power.xi", x)?,
        None => f64::INFINITY,
    };

    let gamma_db = match raw.sinr.gamma_dB {
        None => vec![10.0; c.k],
        Some(GammaDb::Common(g)) => vec![g; c.k],
        Some(GammaDb::PerUser(v)) => {
            if v.len() != c.k {
                return bad("sinr.gamma_dB", format!("has {} entries, expected K = {}", v.len(), c.k));
            }
            v
        }
    };
    if gamma_db.iter().any(|g| !g.is_finite()) {
        return bad("sinr.gamma_dB", "must be finite");
    }
    c.gamma = gamma_db.iter().map(|&g| db_to_linear(g)).collect();

    let geo = raw.geometry;
    c.geometry.bs_xy = geo.bs_xy.unwrap_or(c.geometry.bs_xy);
    c.geometry.irs_xy = geo.irs_xy.unwrap_or(c.geometry.irs_xy);
    if let Some(d) = geo.cu_distance_m {
        c.geometry.cu_distance_m = positive("geometry.cu_distance_m", d)?;
    }
    if let Some([lo, hi]) = geo.clutter_distance_range_m {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("geometry.clutter_distance_range_m", format!("[{lo}, {hi}] is not a valid range"));
        }
        c.geometry.clutter_distance_range_m = [lo, hi];
    }

    let ch = raw.channel;
    if let Some(k) = ch.rician_factor {
        if !(k >= 0.0 && k.is_finite()) {
            return bad("channel.rician_factor", format!("must be nonnegative, got {k}"));
        }
        c.rician_factor = k;
    }
    if let Some(e) = ch.exponents {
        let x = &mut c.exponents;
        x.irs_clutter = e.irs_clutter.unwrap_or(x.irs_clutter);
        x.irs_cu = e.irs_cu.unwrap_or(x.irs_cu);
        x.bs_irs = e.bs_irs.unwrap_or(x.bs_irs);
        x.bs_cu = e.bs_cu.unwrap_or(x.bs_cu);
        x.bs_clutter = e.bs_clutter.unwrap_or(x.bs_clutter);
        let all = [x.irs_clutter, x.irs_cu, x.bs_irs, x.bs_cu, x.bs_clutter];
        if all.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad("channel.exponents", "must be nonnegative and finite");
        }
    }
    if let Some(k0) = ch.K0_dB {
        if !k0.is_finite() {
            return bad("channel.K0_dB", "must be finite");
        }
        c.k0_db = k0;
    }
    if let Some(d) = ch.d_irs_over_lambda {
        c.d_irs_over_lambda = positive("channel.d_irs_over_lambda", d)?;
    }

    let a = raw.algo;
    c.cu_type = a.cu_type.unwrap_or(c.cu_type);
    let mut algo = AlgoConfig::default();
    algo.max_iters = a.max_iters.unwrap_or(algo.max_iters);
    if algo.max_iters == 0 {
        return bad("algo.max_iters", "must be at least 1");
    }
    if let Some(e) = a.eps {
        if !(e > 0.0) {
            return bad("algo.eps", format!("must be positive, got {e}"));
        }
        algo.eps = e;
    }
    algo.relative_stop = a.relative_stop.unwrap_or(algo.relative_stop);
    algo.rand_trials = a.rand_trials.unwrap_or(algo.rand_trials);
    if let Some(t) = a.rank_tol {
        if !(0.0..1.0).contains(&t) {
            return bad("algo.rank_tol", format!("must lie in [0, 1), got {t}"));
        }
        algo.rank_tol = t;
    }
    if let Some(t) = a.sdp_tol {
        if !(t > 0.0 && t < 1.0) {
            return bad("algo.sdp_tol", format!("must lie in (0, 1), got {t}"));
        }
        algo.sdp_tol = t;
    }
    algo.sdp_max_iters = a.sdp_max_iters.unwrap_or(algo.sdp_max_iters);
    if algo.sdp_max_iters == 0 {
        return bad("algo.sdp_max_iters", "must be at least 1");
    }
    algo.init = a.init.unwrap_or(algo.init);

    if let Some(s) = &raw.sweep {
        validate_sweep(s, &c)?;
    }

    let schemes = raw.schemes.unwrap_or_else(|| Scheme::ALL.to_vec());
    if schemes.is_empty() {
        return bad("schemes", "must not be empty");
    }
    for (i, s) in schemes.iter().enumerate() {
        if schemes[..i].contains(s) {
            return bad("schemes", format!("{s} listed twice"));
        }
    }
    let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return bad("seeds", "must not be empty");
    }

    c.validate().map_err(|e| SpecError::Invalid {
        field: "scenario",
        msg: e.to_string(),
    })?;
    Ok(ExperimentSpec {
        scenario: raw.scenario.unwrap_or_else(|| "custom".into()),
        base: c,
        algo,
        sweep: raw.sweep,
        schemes,
        seeds,
        output: raw.output,
    })
}

fn validate_sweep(s: &Sweep, c: &ScenarioConfig) -> Result<(), SpecError> {
    if s.values.is_empty() {
        return bad("sweep.values", "must not be empty");
    }
    if s.values.iter().any(|v| !v.is_finite()) {
        return bad("sweep.values", "must be finite");
    }
    if s.values.windows(2).any(|w| w[1] <= w[0]) {
        return bad("sweep.values", "must be strictly increasing");
    }
    if s.var.is_integer() && s.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return bad("sweep.values", format!("{} takes nonnegative integers", s.var.name()));
    }
    match s.var {
        SweepVar::N if s.values[0] < 1.0 => bad("sweep.values", "N must be at least 1"),
        SweepVar::P0 if s.values[0] <= 0.0 => bad("sweep.values", "P0 must be positive"),
        _ => {
            let mut probe = c.clone();
            for &v in &s.values {
                s.var.apply(&mut probe, v);
                probe.validate().map_err(|e| SpecError::Invalid {
                    field: "sweep.values",
                    msg: e.to_string(),
                })?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_full_scale_defaults() {
        let s = parse_str("{}").unwrap();
        let c = &s.base;
        assert_eq!((c.m, c.n, c.k, c.q), (8, 64, 4, 2));
        assert_eq!(c.p0, 0.5);
        assert!((c.sigma2 - 1e-11).abs() <= 1e-24);
        assert!((c.eta - 1e-7).abs() <= 1e-20);
        let deg: Vec<f64> = c.target_angles.iter().map(|a| a.to_degrees().round()).collect();
        assert_eq!(deg, vec![-60.0, -30.0, 0.0, 30.0, 60.0]);
        assert!(c.xi.is_infinite());
        assert_eq!(s.schemes, Scheme::ALL.to_vec());
        assert_eq!(s.seeds, vec![0]);
    }

    #[test]
    fn negative_gamma_db_is_accepted() {
        let s = parse_str(r#"{"sinr": {"gamma_dB": -5}}"#).unwrap();
        assert!(s.base.gamma.iter().all(|g| (g - 0.31622776601683794).abs() < 1e-15));
    }

    #[test]
    fn per_user_gamma_must_match_k() {
        let ok = parse_str(r#"{"system": {"K": 2}, "sinr": {"gamma_dB": [0, 10]}}"#).unwrap();
        assert_eq!(ok.base.gamma, vec![1.0, 10.0]);
        let err = parse_str(r#"{"system": {"K": 3}, "sinr": {"gamma_dB": [0, 10]}}"#).unwrap_err();
        assert!(err.to_string().contains("sinr.gamma_dB"), "{err}");
    }

    #[test]
    fn invalid_fields_are_named() {
        for (doc, field) in [
            (r#"{"power": {"P0_W": -1}}"#, "power.P0_W"),
            (r#"{"system": {"L": 2}}"#, "system.L"),
            (r#"{"targets": {"angles_deg": [95]}}"#, "targets.angles_deg"),
            (r#"{"sweep": {"var": "Q", "values": [2, 1]}}"#, "sweep.values"),
            (r#"{"sweep": {"var": "N", "values": [8.5]}}"#, "sweep.values"),
            (r#"{"schemes": []}"#, "schemes"),
            (r#"{"seeds": []}"#, "seeds"),
            (r#"{"algo": {"sdp_tol": 2}}"#, "algo.sdp_tol"),
        ] {
            let err = parse_str(doc).unwrap_err();
            assert!(err.to_string().starts_with(field), "{doc}: {err}");
        }
    }

    #[test]
    fn unknown_keys_and_schemes_are_rejected() {
        assert!(matches!(parse_str(r#"{"sytem": {}}"#), Err(SpecError::Json(_))));
        assert!(matches!(parse_str(r#"{"schemes": ["algorithm3"]}"#), Err(SpecError::Json(_))));
        assert!(matches!(parse_str(r#"{"sweep": {"var": "M", "values": [1]}}"#), Err(SpecError::Json(_))));
    }

    #[test]
    fn unit_conversions() {
        let s = parse_str(r#"{"power": {"P0_W": 2, "sigma2_dBm": -70, "eta_uW": 0.5, "xi": 1e-4},
                              "targets": {"angles_deg": [-45, 45]}, "system": {"L": 2}}"#)
        .unwrap();
        assert_eq!(s.base.p0, 2.0);
        assert!((s.base.sigma2 - 1e-10).abs() < 1e-22);
        assert!((s.base.eta - 5e-7).abs() < 1e-20);
        assert_eq!(s.base.xi, 1e-4);
        assert!((s.base.target_angles[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn cells_and_scheme_user_types() {
        let s = parse_str(
            r#"{"algo": {"cu_type": "II"}, "schemes": ["algorithm1", "random-phase"], "seeds": [3, 4],
                "sweep": {"var": "gamma_dB", "values": [0, 5]}}"#,
        )
        .unwrap();
        let cells = s.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], (Some(0.0), Scheme::Algorithm1, 3));
        assert_eq!(cells[7], (Some(5.0), Scheme::RandomPhase, 4));
        assert_eq!(s.scenario_for(Some(5.0), Scheme::Algorithm1, 3).cu_type, CuType::TypeI);
        let c = s.scenario_for(Some(5.0), Scheme::RandomPhase, 4);
        assert_eq!(c.cu_type, CuType::TypeII);
        assert_eq!(c.seed, 4);
        assert!((c.gamma[0] - db_to_linear(5.0)).abs() < 1e-15);
    }

    #[test]
    fn fast_mode_caps_size_and_trials() {
        let mut s = parse_str(r#"{"sweep": {"var": "N", "values": [8, 16, 32]}}"#).unwrap();
        s.make_fast();
        assert_eq!(s.base.n, 16);
        assert_eq!(s.algo.rand_trials, 200);
        assert_eq!(s.sweep.unwrap().values, vec![8.0, 16.0]);
    }
}
