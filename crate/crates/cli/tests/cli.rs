use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dotcavity_cli::output::to_json;
use dotcavity_core::gates::GateSchedule;
use serde_json::Value;
use tempfile::TempDir;

fn reference_point() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper-point.json")
}

fn dotcavity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dotcavity")).args(args).output().expect("binary runs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    let mut all = args.to_vec();
    all.extend(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    dotcavity(&all)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(out: &Path) -> Value {
    let path = dotcavity_cli::manifest_path(out);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Reference config with extra keys merged in.
fn config_with(dir: &TempDir, extra: &str) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(reference_point()).unwrap()).unwrap();
    let extra: Value = serde_json::from_str(extra).unwrap();
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    let path = dir.path().join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn params_at_reference_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("params.json");
    let o = run(&["params"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schedule"]["couplings"]["b_coupling"].as_f64().unwrap(), 0.4);
    let g = v["schedule"]["g_required"].as_f64().unwrap();
    assert!((g / 0.7619 - 1.0).abs() < 0.03, "g = {g}");
    assert!((v["schedule"]["t_gate_ps"].as_f64().unwrap() - 54.28).abs() < 0.01);
    let entries = v["approximations"]["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e["status"] == "pass"));

    let m = manifest(&out);
    assert_eq!(m["experiment"], "params");
    assert_eq!(m["guard"]["passed"], true);
    assert_eq!(m["config"]["k"], 5);
    assert!(m["wall_clock_s"].as_f64().unwrap() >= 0.0);
    assert!(m["version"].is_string());
}

#[test]
fn analytic_truth_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("tt.json");
    let o = run(&["truth-table", "--model", "analytic"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let phases = v["phases"].as_array().unwrap();
    for (row, want) in phases.iter().zip([-1.0, 1.0, 1.0, 1.0]) {
        assert!((row["phase"][0].as_f64().unwrap() - want).abs() < 1e-12, "{row}");
        assert!(row["phase"][1].as_f64().unwrap().abs() < 1e-12, "{row}");
    }
    assert!((v["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let csv = dir.path().join("tt.csv");
    let o = run(&["truth-table", "--model", "analytic", "--format", "csv"], &reference_point(), &csv);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&csv);
    assert_eq!(header, "state,phase_re,phase_im");
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["++", "+-", "-+", "--"]);
}

#[test]
fn analytic_photon_sweep_is_flat() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&["photon-sweep", "--model", "analytic", "--n", "0..4"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "n,fidelity,leakage,phase_pp_re,phase_pp_im,phase_mm_re,phase_mm_im");
    assert_eq!(rows.len(), 5);
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row[0], n.to_string());
        assert!((num(&row[1]) - num(&rows[0][1])).abs() < 1e-9);
        assert!((num(&row[1]) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn effective_sweep_guard_trips_at_low_cutoff() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"photon_cutoff": 12}"#);
    let out = dir.path().join("sweep.csv");
    let o = run(&["photon-sweep", "--model", "effective", "--n", "0..4"], &config, &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
    let m = manifest(&out);
    assert_eq!(m["guard"]["passed"], false);
    assert!(m["guard"]["drift"].as_f64().unwrap() > 1e-8);
}

#[test]
fn effective_sweep_converged_at_reference_cutoff() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&["photon-sweep", "--model", "effective"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert!(num(&row[1]) > 1.0 - 1e-8, "{row:?}");
    }
}

#[test]
fn unknown_key_is_named() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"foo": 1}"#);
    let out = dir.path().join("p.json");
    let o = run(&["params"], &config, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("\"foo\""), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn equal_detunings_rejected() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"delta1": 5.0}"#);
    let o = run(&["params"], &config, &dir.path().join("p.json"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("delta1 must differ from delta2"), "{}", stderr(&o));
}

#[test]
fn all_config_errors_reported_together() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"omega1": 1, "omega3": 1, "delta2": 5, "bar": 2}"#).unwrap();
    let o = run(&["params"], &path, &dir.path().join("p.json"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for needle in ["\"bar\"", "\"omega2\"", "\"delta1\"", "\"k\""] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn missing_and_malformed_config() {
    let dir = TempDir::new().unwrap();
    let o = run(&["params"], &dir.path().join("absent.json"), &dir.path().join("p.json"));
    assert_eq!(o.status.code(), Some(1));
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"omega1\": ").unwrap();
    let o = run(&["params"], &path, &dir.path().join("p.json"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unsolvable_schedule_is_config_error() {
    let dir = TempDir::new().unwrap();
    // delta2 above delta1 is outside the model
    let config = config_with(&dir, r#"{"delta1": 5.0, "delta2": 10.0}"#);
    let o = run(&["params"], &config, &dir.path().join("p.json"));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn json_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("params.json");
    let o = run(&["params"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let schedule: GateSchedule = serde_json::from_value(v["schedule"].clone()).unwrap();
    let text = to_json(&schedule);
    let again: GateSchedule = serde_json::from_str(&text).unwrap();
    assert_eq!(text, to_json(&again));
    assert_eq!(schedule.g_required.unwrap().to_bits(), again.g_required.unwrap().to_bits());
    assert_eq!(schedule.t_gate_natural.to_bits(), again.t_gate_natural.to_bits());
    assert_eq!(schedule.delta_solved.to_bits(), again.delta_solved.to_bits());
    assert_eq!(schedule, again);
}

#[test]
fn unwritable_output_exits_four() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = run(&["params", "--model", "analytic"], &reference_point(), &blocker.join("params.json"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn strict_blocks_warnings_without_writing() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"approx_threshold": 0.05}"#);
    let out = dir.path().join("tt.json");
    let o = run(&["truth-table", "--model", "analytic", "--strict"], &config, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("B vs delta"));
    assert!(!out.exists());
    assert!(!dotcavity_cli::manifest_path(&out).exists());

    let o = run(&["truth-table", "--model", "analytic"], &config, &out);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    let m = manifest(&out);
    let entries = m["approximations"]["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["condition"] == "B vs delta" && e["status"] == "warn"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = run(&["truth-table", "--model", "effective"], &reference_point(), out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let strip = |p: &Path| {
        let mut m = manifest(p);
        m["wall_clock_s"] = Value::Null;
        m["data_file"] = Value::Null;
        m
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn fixed_coupling_mode() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, r#"{"g": 0.7, "omega2": 1, "delta1": 10, "delta2": 5, "k": 2}"#).unwrap();
    let out = dir.path().join("p.json");
    let o = run(&["params", "--model", "analytic"], &path, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["schedule"]["omega_product_required"].as_f64().unwrap() > 0.0);
    assert!(v["residuals"]["laser_phase"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn single_qubit_times() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sq.json");
    let o = run(&["single-qubit"], &reference_point(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["not_time_ps"].as_f64().unwrap() - 5.17).abs() < 0.01);
    assert!((v["half_pi_time_ps"].as_f64().unwrap() * 2.0 - v["not_time_ps"].as_f64().unwrap()).abs() < 1e-12);
    let u = &v["not_unitary"];
    assert!((u[0][1][1].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!(u[0][0][0].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn csv_only_where_tabular() {
    let dir = TempDir::new().unwrap();
    let o = run(&["params", "--format", "csv"], &reference_point(), &dir.path().join("p.csv"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decoherence_single_rate() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"kappa_ladder": "0.0658211956900,0.0658211956900,1"}"#);
    let out = dir.path().join("deco.csv");
    let o = run(&["decoherence"], &config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "kappa_mev,fidelity,tau_eff_ps");
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0][2]) - 19.20).abs() < 0.01, "{rows:?}");
}

#[test]
fn parallel_single_separation() {
    let dir = TempDir::new().unwrap();
    let config = config_with(&dir, r#"{"separation_ladder": "1.2,1.2,1", "steps_per_period": 500}"#);
    let out = dir.path().join("par.csv");
    let o = run(&["parallel"], &config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, "delta_separation_mev,crosstalk_error");
    assert_eq!(rows.len(), 1);
    assert_eq!(num(&rows[0][0]), 1.2);
    let eps = num(&rows[0][1]);
    assert!((0.0..0.01).contains(&eps), "{eps}");
}

#[test]
fn bad_experiment_name() {
    let o = dotcavity(&["teleport", "--config", reference_point().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
