use std::path::PathBuf;

use ratiokde::harness::{
    emit, estimate, run, simulate, ExperimentConfig, Method, ModelSpec, DENSITIES_FILE,
    MODES_FILE, PARAMS_FILE, RUN_FILE,
};
use ratiokde::{EigenSample, Window};
use ratiokde::Error;

fn mini(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        r: 30,
        n_ref: 60,
        points: 64,
        ..ExperimentConfig::model_one(seed)
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn miniature_run_matches_golden_files() {
    let report = run(&mini(7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit(&report, dir.path()).unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    // run.json carries wall-clock timings and is not compared.
    for name in [DENSITIES_FILE, MODES_FILE, PARAMS_FILE] {
        let got = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let path = golden_dir().join(name);
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &got).unwrap();
        } else {
            let want = std::fs::read_to_string(&path).unwrap();
            assert!(got == want, "{name} differs from the golden copy");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = run(&ExperimentConfig { threads: 1, ..mini(3) }).unwrap();
    let b = run(&ExperimentConfig { threads: 3, ..mini(3) }).unwrap();
    assert_eq!(a.densities_csv(), b.densities_csv());
    assert_eq!(a.params.t_star, b.params.t_star);
    assert_eq!(a.mode_records(), b.mode_records());
}

#[test]
fn rerun_writes_identical_files() {
    let report = run(&mini(4)).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit(&report, d1.path()).unwrap();
    emit(&report, d2.path()).unwrap();
    for name in [DENSITIES_FILE, MODES_FILE, PARAMS_FILE, RUN_FILE] {
        assert_eq!(
            std::fs::read(d1.path().join(name)).unwrap(),
            std::fs::read(d2.path().join(name)).unwrap()
        );
    }
}

#[test]
fn different_seed_gives_different_realization() {
    let a = simulate(&mini(1)).unwrap();
    let b = simulate(&mini(2)).unwrap();
    assert_ne!(a.pairs, b.pairs);
}

#[test]
fn block_counts_add_up() {
    let report = run(&mini(5)).unwrap();
    let c = report.counts;
    assert_eq!(c.replications, 60);
    assert_eq!(c.diagonal_entries, 60 * report.params.n / 2);
    assert_eq!(c.real_pairs + c.complex_discarded + c.infinite_discarded, c.diagonal_entries);
}

#[test]
fn noiseless_model_gives_three_spikes() {
    let config = ExperimentConfig {
        model: ModelSpec {
            sigma: 0.0,
            n: Some(6),
            ..ModelSpec::model_one()
        },
        method: Method::Gaussian,
        ..mini(1)
    };
    let sim = simulate(&config).unwrap();
    let first = &sim.pairs.replications()[0];
    assert_eq!(first.len(), 3);
    for rep in sim.pairs.replications() {
        assert_eq!(rep, first);
    }
    let report = run(&config).unwrap();
    let occupied = report.reference.grid.y.iter().filter(|y| **y > 0.0).count();
    assert_eq!(occupied, 3);
    assert_eq!(report.modes_reference.len(), 3);
}

#[test]
fn empty_mode_list_is_written_as_empty_array() {
    let mut report = run(&ExperimentConfig {
        method: Method::Gaussian,
        ..mini(6)
    })
    .unwrap();
    report.modes_reference.clear();
    report.modes_gaussian = Some(Vec::new());
    let dir = tempfile::tempdir().unwrap();
    emit(&report, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(MODES_FILE)).unwrap();
    assert_eq!(text.trim(), "[]");
    let csv = std::fs::read_to_string(dir.path().join(DENSITIES_FILE)).unwrap();
    // The proposed column stays empty when that estimator was not run.
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn emit_reports_unwritable_path() {
    let report = run(&mini(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit(&report, &blocker.join("out")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("file"));
}

#[test]
fn config_schema_is_strict() {
    let good = serde_json::to_string(&mini(1)).unwrap();
    assert_eq!(ExperimentConfig::from_json(&good).unwrap(), mini(1));
    let unknown = good.replacen("{", "{\"bogus\":1,", 1);
    assert!(ExperimentConfig::from_json(&unknown).unwrap_err().is_validation());
    let bad_r = serde_json::to_string(&ExperimentConfig { r: 100, ..mini(1) }).unwrap();
    assert!(ExperimentConfig::from_json(&bad_r).unwrap_err().is_validation());
}

#[test]
fn phase_is_attached_to_errors() {
    let config = ExperimentConfig {
        model: ModelSpec {
            zeta: vec![0.9, 0.9],
            f: vec![1.0, 1.0],
            sigma: 1e-3,
            n: None,
        },
        ..mini(1)
    };
    let err = run(&config).unwrap_err();
    assert!(err.to_string().starts_with("model:"), "{err}");
    assert!(err.is_validation());
}

#[test]
fn estimate_from_ratios_finds_clusters() {
    let reps: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let e = ((i * 37) % 101) as f64 / 101.0 - 0.5;
            vec![0.8 + 0.004 * e, 0.9 - 0.004 * e, 0.95 + 0.002 * e]
        })
        .collect();
    let sample = EigenSample::from_ratios(reps).unwrap();
    let (grid, modes, params) = estimate(&sample, Method::Gaussian, Window::new(0.75, 1.0).unwrap(), 256, 2.0).unwrap();
    assert_eq!(grid.len(), 256);
    assert!(params.t_plus.is_some());
    let xs: Vec<f64> = modes.iter().map(|m| m.x).collect();
    assert_eq!(xs.len(), 3, "{xs:?}");
    for (x, z) in xs.iter().zip([0.8, 0.9, 0.95]) {
        assert!((x - z).abs() < 0.005);
    }
}
