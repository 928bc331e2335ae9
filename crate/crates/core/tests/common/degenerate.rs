//! Desk scenarios whose BS→IRS channel is spanned by the target steering
//! vectors, so that the relaxed beamforming problem has higher-rank optima.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_isac::channel::{build_channels, ChannelSet, CuType, ScenarioConfig};
use irs_isac::matrix::{standard_complex_normal, CMatrix, CVector};

pub struct Degenerate {
    pub config: ScenarioConfig,
    pub channels: ChannelSet,
    pub phi: CVector,
}

/// Even seeds are Type-I, odd seeds Type-II; one or two users.
pub fn degenerate_desk(seed: u64) -> Degenerate {
    let cu = if seed % 2 == 0 { CuType::TypeI } else { CuType::TypeII };
    let k = 1 + (seed as usize / 2) % 2;
    let config = ScenarioConfig {
        seed,
        cu_type: cu,
        ..ScenarioConfig::desk()
    }
    .with_users(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = build_channels(&config, &mut rng).unwrap();
    let n = config.n;
    let l = channels.steering.len();
    assert!(l < config.m);

    // desk angles are DFT-spaced, so the steering vectors are orthogonal
    let mut g = CMatrix::zeros(n, config.m);
    for (j, a) in channels.steering.iter().enumerate() {
        g.set_column(j, a);
    }
    for j in l..config.m {
        let mut x = standard_complex_normal(n, &mut rng);
        for i in 0..j {
            let c = g.column(i).into_owned();
            let proj = c.dotc(&x) / c.dotc(&c);
            x -= c * proj;
        }
        let norm = x.norm();
        g.set_column(j, &(x * Complex64::new((n as f64).sqrt() / norm, 0.0)));
    }
    let scale = channels.g.norm() / g.norm();
    channels.g = g * Complex64::new(scale, 0.0);
    let phi = CVector::from_element(n, Complex64::new(1.0, 0.0));
    Degenerate { config, channels, phi }
}
