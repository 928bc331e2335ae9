mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::degenerate::degenerate_desk;
use irs_isac::altopt::{algorithm1, algorithm2, run_scheme, AlgoConfig, Scheme};
use irs_isac::channel::{build_channels, phases_to_vector, CuType, EffectiveChannels, ScenarioConfig};
use irs_isac::matrix::{outer, standard_complex_normal, CVector};
use irs_isac::relax::{
    build_phase_sdp, extract_beamformers, is_rank_one, lift_phase, metrics, solve_beamforming, AuditReport,
    Beamformers, BeamformingKind, DEFAULT_RANK_TOL,
};

fn quick() -> AlgoConfig {
    AlgoConfig {
        rand_trials: 100,
        ..AlgoConfig::default()
    }
}

#[test]
fn degenerate_channels_force_higher_rank_and_reconstruct_exactly() {
    let opts = AlgoConfig::default().solver();
    for seed in 0..8 {
        let d = degenerate_desk(seed);
        let eff = EffectiveChannels::new(&d.channels, &d.phi).unwrap();
        let kind = BeamformingKind::for_cu(d.config.cu_type);
        let relaxed = solve_beamforming(&eff, &d.config, kind, &opts).unwrap();
        let mats: Vec<_> = (0..d.config.k).map(|k| relaxed.beamformers.covariance(k)).collect();
        assert!(mats.iter().any(|w| !is_rank_one(w, DEFAULT_RANK_TOL).unwrap()), "seed {seed}");

        let sol = extract_beamformers(&mats, &relaxed.r0, &eff, &d.config, DEFAULT_RANK_TOL).unwrap();
        assert!(matches!(sol.beamformers, Beamformers::Vectors(_)));
        let m = metrics(&eff, &sol.beamformers, &sol.r0, &d.config).unwrap();
        let audit = AuditReport::new(&m, &d.config, d.config.cu_type, None);
        assert!(audit.passes(), "seed {seed}: {audit:?}");
        assert!((sol.objective - relaxed.objective).abs() <= 1e-9 * relaxed.objective);
    }
}

#[test]
fn joint_design_is_deterministic_per_seed() {
    let config = ScenarioConfig {
        seed: 4,
        ..ScenarioConfig::desk()
    };
    let ch = build_channels(&config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let a = algorithm1(&ch, &config, &quick(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = algorithm1(&ch, &config, &quick(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.phi(), b.phi());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lifted_target_and_diagonal_rows_match_direct_metrics(seed in any::<u64>(), xi in 1e-6f64..1e-3) {
        let config = ScenarioConfig { seed, xi, ..ScenarioConfig::desk() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = build_channels(&config, &mut rng).unwrap();
        let angles: Vec<f64> = (0..config.n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let phi = phases_to_vector(&angles);
        let bf = Beamformers::Vectors(
            (0..config.k).map(|_| standard_complex_normal(config.m, &mut rng).unscale(10.0)).collect(),
        );
        let v0: CVector = standard_complex_normal(config.m, &mut rng).unscale(10.0);
        let r0 = outer(&v0, &v0);
        let eff = EffectiveChannels::new(&ch, &phi).unwrap();
        let m = metrics(&eff, &bf, &r0, &config).unwrap();
        let psi = lift_phase(&phi);
        let v = outer(&psi, &psi);
        for cu in [CuType::TypeI, CuType::TypeII] {
            let p = build_phase_sdp(&ch, &bf, &r0, &config, cu).unwrap();
            let vals = p.constraint_values(std::slice::from_ref(&v), &[0.0]);
            for (l, g) in m.beampattern.iter().enumerate() {
                let i = p.constraint_index(&format!("target[{l}]")).unwrap();
                prop_assert!((vals[i] - g).abs() <= 1e-10 * g);
            }
            let i = p.constraint_index("cross").unwrap();
            prop_assert!((vals[i] - m.cross_corr).abs() <= 1e-10 * m.beampattern.iter().sum::<f64>());
        }
    }

    #[test]
    fn alternating_designs_are_monotone_and_audited(seed in 0u64..1000) {
        let algo = quick();
        for cu in [CuType::TypeI, CuType::TypeII] {
            let config = ScenarioConfig { seed, cu_type: cu, n: 8, ..ScenarioConfig::desk() };
            let ch = build_channels(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rec = match cu {
                CuType::TypeI => algorithm1(&ch, &config, &algo, &mut rng),
                CuType::TypeII => algorithm2(&ch, &config, &algo, &mut rng),
            };
            let rec = rec.map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(rec.trace.windows(2).all(|w| w[1] >= w[0] - 1e-7 * w[0].abs().max(1e-12)));
            prop_assert!(rec.audit.passes(), "{:?}", rec.audit);
            prop_assert!(rec.phi().unwrap().iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
        }
    }

    #[test]
    fn random_phase_never_beats_its_own_rerun(seed in 0u64..1000) {
        let config = ScenarioConfig { seed, n: 8, ..ScenarioConfig::desk() };
        let ch = build_channels(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = run_scheme(Scheme::RandomPhase, &ch, &config, &quick(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = run_scheme(Scheme::RandomPhase, &ch, &config, &quick(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.objective(), b.objective());
        prop_assert!(a.audit.passes());
    }
}
