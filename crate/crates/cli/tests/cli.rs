use std::collections::BTreeMap;
use std::fs;
use std::process::{Command, Output};

use chondro_core::verify::brute_force_b_c;
use chondro_core::ModelParams;

fn chondro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chondro"))
        .args(args)
        .env_remove("CHONDRO_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// `key=value` pairs of one stdout line.
fn pairs(line: &str) -> BTreeMap<String, String> {
    line.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').expect("key=value");
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn num(map: &BTreeMap<String, String>, key: &str) -> f64 {
    map[key].parse().unwrap()
}

#[test]
fn steady_state_reference() {
    let out = chondro(&["steady-state", "--reference"]);
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out);
    let kv = pairs(line.trim());
    assert_eq!(kv["c1*"], "0.8");
    assert_eq!(kv["c2*"], "0.2");
    assert_eq!(kv["h*"], "2.5");
    assert!(num(&kv, "residual") <= 1e-12);
}

#[test]
fn steady_state_symmetric_rates_split_capacity() {
    let out = chondro(&["steady-state", "--reference", "--alpha", "0.4", "--delta", "0.4", "--kc1", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let kv = pairs(stdout(&out).trim());
    assert_eq!(kv["c1*"], "1.5");
    assert_eq!(kv["c2*"], "1.5");
}

#[test]
fn steady_state_inline_needs_every_parameter() {
    let out = chondro(&["steady-state", "--alpha", "0.15"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing required"));
    let full = chondro(&[
        "steady-state", "--a1", "0.015", "--a2", "0.007", "--alpha", "0.15", "--delta", "0.6", "--beta", "0.05", "--gamma1",
        "0.1", "--gamma2", "0.3", "--kc1", "1", "--kc2", "1",
    ]);
    assert_eq!(full.status.code(), Some(0));
    assert_eq!(pairs(stdout(&full).trim())["h*"], "2.5");
}

#[test]
fn bad_parameters_exit_2() {
    assert_eq!(chondro(&["steady-state", "--reference", "--a1", "-0.1"]).status.code(), Some(2));
    assert_eq!(chondro(&["stability", "--reference", "--geometry", "disk:1"]).status.code(), Some(2));
    assert_eq!(chondro(&["steady-state", "--reference", "--config", "x.json"]).status.code(), Some(2));
    assert_eq!(chondro(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn stability_table_rows_match_enumeration() {
    let out = chondro(&["stability", "--reference", "--geometry", "interval:1", "--table"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    let summary = pairs(lines.next().unwrap());
    assert_eq!(summary["j0"], "1");
    assert_eq!(summary["degenerate"], "false");
    let rows: Vec<_> = lines.map(pairs).collect();
    let report = chondro_core::stability::critical_b(&ModelParams::default(), &chondro_core::Domain::Interval { length: 1.0 }).unwrap();
    assert_eq!(rows.len(), report.table.len());
    for (row, entry) in rows.iter().zip(&report.table) {
        assert_eq!(row["j"], entry.j.to_string());
        assert!((num(row, "psi") - entry.psi).abs() <= 1e-13 * entry.psi);
    }
}

#[test]
fn stability_rectangle_matches_brute_force() {
    let out = chondro(&["stability", "--reference", "--geometry", "rectangle:10x10"]);
    assert_eq!(out.status.code(), Some(0));
    let kv = pairs(stdout(&out).lines().next().unwrap());
    let brute = brute_force_b_c(&ModelParams::default(), 10.0, 10.0, 50).unwrap();
    assert!((num(&kv, "b_c") - brute).abs() <= 1e-13 * brute);
}

#[test]
fn stability_reads_geometry_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"scenario": "scenario4-b3.7", "params": {"beta": 0.06}}"#).unwrap();
    let out = chondro(&["stability", "--config", path.to_str().unwrap(), "--table"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<_> = text.lines().skip(1).map(pairs).collect();
    // eigenvalues of [0, 10] are (jπ/10)²
    assert!((num(&rows[0], "k") - (std::f64::consts::PI / 10.0).powi(2)).abs() < 1e-12);
}

#[test]
fn simulate_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    fs::write(
        &cfg,
        r#"{"scenario": "2d-gaussian", "resolution": {"nx": 15, "ny": 15}, "time": {"t_end": 1}, "output": {"times": [0, 1]}}"#,
    )
    .unwrap();
    let runs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for run in &runs {
        let out = chondro(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let kv: BTreeMap<_, _> = stdout(&out).lines().flat_map(|l| pairs(l).into_iter()).collect();
        assert_eq!(kv["status"], "completed");
        assert_eq!(kv["violations"], "0");
    }
    for name in ["2d-gaussian_t0.csv", "2d-gaussian_t1.csv", "timeseries.csv", "2d-gaussian_t1_h.pgm"] {
        assert_eq!(fs::read(runs[0].join(name)).unwrap(), fs::read(runs[1].join(name)).unwrap(), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(runs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    fs::write(&cfg, r#"{"scenario": "2d-gaussian", "resolution": {"nx": 9, "ny": 9}, "time": {"t_end": 0.1}}"#).unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out_dir = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_chondro"));
        cmd.args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        cmd.env_remove("CHONDRO_SEED");
        if let Some(e) = env {
            cmd.env("CHONDRO_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    assert_eq!(run("config", None, None), 1);
    assert_eq!(run("env", Some("11"), None), 11);
    assert_eq!(run("flag", Some("11"), Some("12")), 12);
}

#[test]
fn simulate_rejects_conflicting_sources() {
    let out = chondro(&["simulate", "--scenario", "scenario1-b3.7", "--config", "c.json", "--out", "/tmp/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(chondro(&["simulate", "--out", "/tmp/never"]).status.code(), Some(2));
}

#[test]
fn simulate_divergence_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.json");
    fs::write(
        &cfg,
        r#"{"scenario": "scenario1-b3.7", "b": 200, "time": {"t_end": 50, "dt_policy": {"kind": "fixed", "dt": 0.5}}}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = chondro(&["simulate", "--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("status=diverged"));
    assert!(run.join("manifest.json").exists());
    assert!(run.join("timeseries.csv").exists());
}

#[test]
fn verify_stability_suite_passes() {
    let out = chondro(&["verify", "--suite", "stability"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("check=routh_hurwitz_vs_roots status=pass"));
    assert!(text.trim_end().ends_with("passed=6 failed=0"));
}

#[test]
fn scenarios_lists_every_builtin() {
    let out = chondro(&["scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = stdout(&out).lines().map(|l| pairs(l)["scenario"].clone()).collect();
    let expected: Vec<String> = chondro_core::builtin_scenarios().into_iter().map(|s| s.name).collect();
    assert_eq!(names, expected);
}
