use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kakinuma"))
}

const CONFIG: &str = r#"{
  "rho1": 1.0, "rho2": 2.0, "h1": 1.0, "h2": 1.5, "g": 9.81,
  "N": 1, "p_list": [0, 2], "L": 6.283185307179586, "M": 32,
  "bottom": {"type": "cosine", "amplitude": 0.1, "mode": 1},
  "dt": 0.05, "t_end": 0.2, "cg_tol": 1e-12, "output_every": 2
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.in.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(|c| c.parse::<f64>().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn dispersion_single_term_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"N\": 1, \"p_list\": [0, 2]", "\"N\": 0, \"p_list\": [0]"));
    let out = dir.path().join("d");
    let (code, _, err) = run(&["dispersion", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--points", "50"]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = read_rows(&out.join("dispersion.csv"));
    assert_eq!(header, ["xi", "cK2", "cIW2", "cSW2", "rel_error"]);
    assert_eq!(rows.len(), 50);
    for r in &rows {
        assert!(((r[1] - r[3]) / r[3]).abs() < 1e-12);
    }
    assert!(out.join("order_scan.csv").exists());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("config.json").exists());
}

#[test]
fn xi_max_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("d");
    let (code, _, _) = run(&[
        "dispersion", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--xi-max", "2.5", "--points", "10",
    ]);
    assert_eq!(code, 0);
    let (_, rows) = read_rows(&out.join("dispersion.csv"));
    assert_eq!(rows.last().unwrap()[0], 2.5);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"dt\"", "\"delta_t\""));
    let (code, _, err) = run(&["dispersion", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("delta_t"), "{err}");
    let cfg = write_config(dir.path(), "{\"rho1\": }");
    let (code, _, err) = run(&["prepare", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn prepare_then_diagnose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("p");
    let (code, _, err) = run(&["prepare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--wave-amplitude", "0.05"]);
    assert_eq!(code, 0, "{err}");
    let state = out.join("state.csv");
    let (header, rows) = read_rows(&state);
    assert_eq!(header, ["x", "zeta", "phi1_0", "phi1_1", "phi2_0", "phi2_1"]);
    assert_eq!(rows.len(), 32);
    let dout = dir.path().join("diag");
    let (code, stdout, err) = run(&[
        "diagnose", "--config", cfg.to_str().unwrap(), "--state", state.to_str().unwrap(), "--out", dout.to_str().unwrap(),
        "--stability",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("t,mass,energy,momentum,hamiltonian"));
    let (_, rows) = read_rows(&dout.join("diagnostics.csv"));
    let (e, h) = (rows[0][2], rows[0][4]);
    assert!(((e - h) / h).abs() < 1e-10, "{e} {h}");
    assert!(rows[0][3].is_nan());
    let (header, rows) = read_rows(&dout.join("stability.csv"));
    assert_eq!(header, ["x", "a", "margin"]);
    assert!(rows.iter().all(|r| r[2] > 0.0));
}

#[test]
fn simulate_writes_series_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let (code, _, err) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        outputs.push(out);
    }
    let series = std::fs::read(outputs[0].join("series.csv")).unwrap();
    assert_eq!(series, std::fs::read(outputs[1].join("series.csv")).unwrap());
    let (header, rows) = read_rows(&outputs[0].join("series.csv"));
    assert_eq!(
        header,
        ["t", "mass", "energy", "momentum", "hamiltonian", "stability_margin", "compat_residual", "min_H1", "min_H2"]
    );
    assert_eq!(rows.len(), 3);
    assert!(outputs[0].join("state_00000.000000.csv").exists());
    assert!(outputs[0].join("state_00000.200000.csv").exists());
    assert!(outputs[0].join("local_laws.csv").exists());
    let m0: serde_json::Value = serde_json::from_slice(&std::fs::read(outputs[0].join("manifest.json")).unwrap()).unwrap();
    let m1: serde_json::Value = serde_json::from_slice(&std::fs::read(outputs[1].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m0["run_id"], m1["run_id"]);
    // the snapshot directory can be re-diagnosed
    let dout = dir.path().join("series");
    let (code, _, err) = run(&[
        "diagnose", "--config", cfg.to_str().unwrap(), "--series", outputs[0].to_str().unwrap(), "--out", dout.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (_, again) = read_rows(&dout.join("series.csv"));
    assert_eq!(again.len(), 3);
    for (a, b) in again.iter().zip(&rows) {
        assert!(((a[4] - b[4]) / b[4]).abs() < 1e-10);
    }
}

#[test]
fn direct_scheme_from_prepared_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let p = dir.path().join("p");
    assert_eq!(run(&["prepare", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]).0, 0);
    let out = dir.path().join("s");
    let (code, _, err) = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--input",
        p.join("state.csv").to_str().unwrap(), "--scheme", "direct", "--reproject-every", "2",
    ]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn stability_violation_exits_before_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"output_every\": 2", "\"output_every\": 2, \"margin_min\": 100.0"));
    let out = dir.path().join("s");
    let (code, _, err) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    let (_, rows) = read_rows(&out.join("series.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
}

#[test]
fn cavitating_input_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let state = dir.path().join("bad.csv");
    let mut text = String::from("x,zeta,phi\n");
    for n in 0..32 {
        text.push_str(&format!("{},{},0\n", n as f64 * 0.19634954084936207, if n == 3 { 1.2 } else { 0.0 }));
    }
    std::fs::write(&state, text).unwrap();
    let (code, _, err) = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--input",
        state.to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn selftest_default_passes() {
    let (code, stdout, err) = run(&["selftest"]);
    assert_eq!(code, 0, "{stdout}{err}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

#[test]
fn thread_setting_is_validated() {
    let out = bin().args(["selftest"]).env("KAKINUMA_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["selftest"]).env("KAKINUMA_THREADS", "2").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
