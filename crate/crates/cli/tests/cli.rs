use std::path::Path;
use std::process::{Command, Output};

use irs_isac_cli::run::{BEAMPATTERN_CSV, BEAMPATTERN_GRID, CONVERGENCE_CSV, SUMMARY_JSON, SWEEP_CSV};

fn irs_isac(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irs-isac"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.headers().unwrap().iter().map(String::from).collect()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_JSON)).unwrap()).unwrap()
}

fn write_config(dir: &Path, doc: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn convergence_preset_writes_monotone_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = irs_isac(&["--preset", "convergence", "--fast", "--seed", "3"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let path = tmp.path().join(CONVERGENCE_CSV);
    assert_eq!(header(&path), ["scheme", "seed", "iter", "objective_W"]);
    let rows = rows(&path);
    for scheme in ["algorithm1", "algorithm2"] {
        let trace: Vec<f64> = rows
            .iter()
            .filter(|r| &r[0] == scheme)
            .map(|r| {
                assert_eq!(&r[1], "3");
                r[3].parse().unwrap()
            })
            .collect();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-7)), "{scheme}: {trace:?}");
    }

    let s = summary(tmp.path());
    assert_eq!(s["exit_code"], 0);
    assert_eq!(s["runs_total"], 2);
    assert!(s["audit_max"]["power"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["runs"][1]["cu_type"], "II");
}

#[test]
fn beampattern_covers_a_one_degree_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = irs_isac(&["--preset", "beampattern", "--fast"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let path = tmp.path().join(BEAMPATTERN_CSV);
    assert_eq!(header(&path), ["scheme", "seed", "angle_deg", "gain_W"]);
    let rows = rows(&path);
    let joint: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[0] == "algorithm1").collect();
    let angles: Vec<i32> = joint.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(angles, BEAMPATTERN_GRID.collect::<Vec<_>>());
    for r in rows.iter().filter(|r| &r[0] == "no-irs") {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
    // the design steers energy at the configured targets
    let gain = |deg: i32| -> f64 { joint.iter().find(|r| r[2] == *deg.to_string()).unwrap()[3].parse().unwrap() };
    assert!(gain(0) > gain(-80) && gain(30) > gain(80));
}

#[test]
fn sweep_rows_follow_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        serde_json::json!({
            "schemes": ["random-phase", "no-irs"],
            "seeds": [1, 2],
            "sweep": {"var": "P0", "values": [0.2, 0.8]}
        }),
    );
    let out = irs_isac(&["--preset", "power-sweep", "--config", cfg.to_str().unwrap(), "--fast"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let path = tmp.path().join(SWEEP_CSV);
    assert_eq!(header(&path), ["scheme", "sweep_value", "seed", "min_gain_W", "iterations", "feasible"]);
    let rows = rows(&path);
    assert_eq!(rows.len(), 8);
    let key: Vec<(String, String, String)> = rows.iter().map(|r| (r[0].into(), r[1].into(), r[2].into())).collect();
    assert_eq!(key[0], ("random-phase".into(), "0.2".into(), "1".into()));
    assert_eq!(key[7], ("no-irs".into(), "0.8".into(), "2".into()));
    assert!(rows.iter().all(|r| &r[5] == "true"));
    // a larger budget never hurts the same random phases
    let gain = |v: &str, seed: &str| -> f64 {
        rows.iter().find(|r| &r[0] == "random-phase" && &r[1] == v && &r[2] == seed).unwrap()[3].parse().unwrap()
    };
    assert!(gain("0.8", "1") >= gain("0.2", "1"));
    assert!(!tmp.path().join(CONVERGENCE_CSV).exists());
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), serde_json::json!({"power": {"P0_W": -1}}));
    let out = irs_isac(&["--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("power.P0_W"));

    let out = irs_isac(&["--config", "/nonexistent/config.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_irs-isac")).arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "clap usage errors also exit with 2");
}

#[test]
fn unreachable_sinr_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        serde_json::json!({"sinr": {"gamma_dB": 150}, "schemes": ["algorithm1"], "seeds": [0]}),
    );
    let out = irs_isac(&["--preset", "convergence", "--config", cfg.to_str().unwrap(), "--fast"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let s = summary(tmp.path());
    assert_eq!(s["exit_code"], 3);
    assert_eq!(s["runs"][0]["status"], "solver-failed");
    assert!(s["runs"][0]["error"].as_str().unwrap().contains("Infeasible"));
}
