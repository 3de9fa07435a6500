use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ratiokde"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn density_prints_csv() {
    let o = run(&["density", "--nu-w", "0.9", "--rho", "0.5", "--t", "0.01", "--window", "0.5,1.3", "--points", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,h");
    assert_eq!(lines.len(), 6);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.5);
}

#[test]
fn cauchy_through_general_family() {
    let o = run(&[
        "density", "--nu-v", "0", "--nu-w", "0", "--sigma2-v", "1", "--sigma2-w", "1", "--gamma", "0",
        "--window", "-1,1", "--points", "3",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mid: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((mid[1] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn pde_check_columns_and_small_residual() {
    let o = run(&["pde-check", "--nu-w", "0.9", "--rho", "0.3", "--t", "0.05", "--window", "0.2,1.6", "--points", "40"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,h,h_t,D,C,S,residual");
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(v[6].abs() <= 1e-8 * v[2].abs().max(1e-6), "{l}");
    }
}

#[test]
fn invalid_parameter_exits_2() {
    let o = run(&["density", "--nu-w", "0.9", "--rho", "1.5", "--t", "0.1", "--window", "0,1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(code(&run(&["simulate", "--bogus"])), 2);
}

#[test]
fn bad_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{\"model\": 3}").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

fn simulate_small(out: &Path, seed: &str, threads: &str) -> Output {
    run(&[
        "--threads", threads, "simulate", "--seed", seed, "--replications", "20", "--n-ref", "40",
        "--points", "64", "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn simulate_writes_outputs_deterministically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = simulate_small(a.path(), "11", "1");
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&simulate_small(b.path(), "11", "2")), 0);
    for f in ["densities.csv", "modes.json", "params.json", "run.json"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
    assert_eq!(
        std::fs::read(a.path().join("densities.csv")).unwrap(),
        std::fs::read(b.path().join("densities.csv")).unwrap()
    );
    let header = std::fs::read_to_string(a.path().join("densities.csv")).unwrap();
    assert!(header.starts_with("x,reference,empirical,gaussian,proposed\n"));
    let run_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["seed"], 11);
    assert!(run_json["versions"]["ratiokde"].is_string());
    assert!(run_json["timings"]["eigenvalues"].is_number());
}

#[test]
fn saved_dataset_feeds_estimate_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let sim_out = dir.path().join("sim");
    let o = run(&[
        "simulate", "--seed", "3", "--replications", "30", "--n-ref", "30", "--points", "64",
        "--save-data", data.to_str().unwrap(), "--out", sim_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let est = dir.path().join("est");
    let o = run(&[
        "estimate", "--data", data.to_str().unwrap(), "--method", "gaussian", "--window", "0.75,1",
        "--points", "128", "--tau", "2", "--out", est.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let density = est.join("density.csv");
    let text = std::fs::read_to_string(&density).unwrap();
    assert!(text.starts_with("x,density\n"));
    assert_eq!(text.lines().count(), 129);
    let est_modes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(est.join("modes.json")).unwrap()).unwrap();

    let o = run(&["modes", "--density", density.to_str().unwrap(), "--tau", "2"]);
    assert_eq!(code(&o), 0);
    let again: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(again, est_modes);
}

#[test]
fn estimate_on_degenerate_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    // Identical noiseless rows: every replication gives the same pairs.
    let row: Vec<String> = (0..6)
        .map(|k| {
            let v: f64 = [0.8f64, 0.9, 0.95].iter().map(|z| z.powi(k)).sum();
            format!("{v:.16e}")
        })
        .collect();
    let mut text = String::from("d1,d2,d3,d4,d5,d6\n");
    for _ in 0..10 {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&data, text).unwrap();
    let o = run(&[
        "estimate", "--data", data.to_str().unwrap(), "--method", "proposed", "--window", "0.75,1",
        "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_density_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    std::fs::write(&f, "x,y\n0,1\n1,2\n2,1\n").unwrap();
    let o = run(&["modes", "--density", f.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["modes", "--density", f.to_str().unwrap(), "--column", "y", "--tau", "0.5"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["x"], 1.0);
}
