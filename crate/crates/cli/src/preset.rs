//! Built-in desk-scale experiments.

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Convergence,
    Beampattern,
    SinrSweep,
    ClutterSweep,
    PowerSweep,
    NSweep,
}

fn desk() -> Value {
    json!({
        "system": {"M": 4, "N": 12, "K": 2, "Q": 1},
        "targets": {"angles_deg": [-30, 0, 30]},
        "sinr": {"gamma_dB": 10},
        "seeds": [0, 1, 2]
    })
}

const SWEEP_SCHEMES: [&str; 5] = [
    "algorithm1",
    "info-beamforming",
    "separate-design",
    "random-phase",
    "no-irs",
];

impl Preset {
    /// JSON document for the preset; a user config is merged on top of it.
    pub fn document(self) -> Value {
        let mut doc = desk();
        let extra = match self {
            Preset::Convergence => json!({
                "scenario": "convergence",
                "schemes": ["algorithm1", "algorithm2"],
            }),
            Preset::Beampattern => json!({
                "scenario": "beampattern",
                "schemes": ["algorithm1", "algorithm2", "separate-design", "random-phase", "no-irs"],
                "seeds": [0],
            }),
            Preset::SinrSweep => json!({
                "scenario": "sinr-sweep",
                "schemes": SWEEP_SCHEMES,
                "sweep": {"var": "gamma_dB", "values": [0, 5, 10, 15]},
            }),
            Preset::ClutterSweep => json!({
                "scenario": "clutter-sweep",
                "schemes": SWEEP_SCHEMES,
                "sweep": {"var": "Q", "values": [0, 1, 2, 3]},
            }),
            Preset::PowerSweep => json!({
                "scenario": "power-sweep",
                "schemes": SWEEP_SCHEMES,
                "sweep": {"var": "P0", "values": [0.1, 0.2, 0.5, 1.0]},
            }),
            Preset::NSweep => json!({
                "scenario": "n-sweep",
                "schemes": SWEEP_SCHEMES,
                "sweep": {"var": "N", "values": [4, 8, 12, 16]},
            }),
        };
        merge(&mut doc, extra);
        doc
    }
}

/// Recursive object merge; non-object values in `over` replace those in `base`.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::from_value;
    use clap::ValueEnum;

    #[test]
    fn every_preset_is_a_valid_spec() {
        for p in Preset::value_variants() {
            let spec = from_value(p.document()).unwrap();
            assert_eq!(spec.base.m, 4);
            assert_eq!(spec.base.l(), 3);
        }
    }

    #[test]
    fn merge_is_recursive() {
        let mut a = json!({"system": {"M": 4, "N": 12}, "seeds": [0, 1]});
        merge(&mut a, json!({"system": {"N": 8}, "seeds": [5]}));
        assert_eq!(a, json!({"system": {"M": 4, "N": 8}, "seeds": [5]}));
    }
}
