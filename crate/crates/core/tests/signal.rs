use proptest::prelude::*;
use ratiokde::harness::ModelSpec;
use ratiokde::signal::{generate, select_n, Dataset, DatasetFormat, SignalModel};
use ratiokde::Error;

#[test]
fn noise_has_requested_moments() {
    let sigma = 0.25;
    let model = SignalModel::new(vec![0.5f64], vec![1.0], sigma, 1000, 9).unwrap();
    let clean = model.noiseless();
    let mut eps = Vec::with_capacity(1_000_000);
    for r in 0..1000 {
        let d = generate(&model, r);
        eps.extend(d.iter().zip(&clean).map(|(a, b)| a - b));
    }
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    // Standard errors at 1e6 draws: mean σ/1000, variance σ²·√2/1000.
    assert!(mean.abs() < 5.0 * sigma / 1000.0, "mean {mean}");
    assert!((var - sigma * sigma).abs() < 5.0 * sigma * sigma * 2f64.sqrt() / 1000.0, "var {var}");
}

#[test]
fn model_one_sample_length() {
    let m = ModelSpec::model_one();
    let sel = select_n(&m.zeta, &m.f, m.sigma, 100_000).unwrap();
    assert_eq!(sel.n, 128);
    assert!(!sel.capped);
    let model = SignalModel::new(m.zeta.clone(), m.f.clone(), m.sigma, 128, 0).unwrap();
    assert!(model.noiseless_at(127).abs() >= m.sigma);
    assert!(model.noiseless_at(128).abs() < m.sigma);
}

#[test]
fn model_two_sample_length_is_even() {
    let m = ModelSpec::model_two();
    let sel = select_n(&m.zeta, &m.f, m.sigma, 100_000).unwrap();
    assert_eq!(sel.n % 2, 0);
    assert!(!sel.capped);
}

fn sample_dataset() -> Dataset {
    let m = ModelSpec::model_one();
    let model = SignalModel::new(m.zeta, m.f, m.sigma, 128, 5).unwrap();
    Dataset::generate(&model, 250)
}

#[test]
fn csv_round_trip_is_bit_identical() {
    let ds = sample_dataset();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    ds.write(&path, DatasetFormat::Csv).unwrap();
    let back = Dataset::read(&path, DatasetFormat::Csv).unwrap();
    assert_eq!(back.model, None);
    assert_eq!(back.data.len(), 250);
    for (a, b) in ds.data.iter().zip(&back.data) {
        assert_eq!(a.len(), 128);
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn json_round_trip_keeps_model() {
    let ds = sample_dataset();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.json");
    ds.write(&path, DatasetFormat::from_path(&path)).unwrap();
    let back = Dataset::read(&path, DatasetFormat::Json).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn csv_header_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "d1,d2,x3\n1,2,3\n").unwrap();
    match Dataset::read(&path, DatasetFormat::Csv) {
        Err(Error::Parse { row: 1, column: 3, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn csv_bad_number_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "d1,d2\n1,2\n3,oops\n").unwrap();
    match Dataset::read(&path, DatasetFormat::Csv) {
        Err(e @ Error::Parse { row: 3, column: 2, .. }) => assert!(e.is_validation()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error_with_path() {
    let err = Dataset::read("/nonexistent/data.csv".as_ref(), DatasetFormat::Csv).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/data.csv"));
}

proptest! {
    #[test]
    fn select_n_is_monotone_in_sigma(s1 in 1e-6f64..1e-1, s2 in 1e-6f64..1e-1) {
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let z = [0.8, 0.9, 0.95];
        let f = [1.0, 1.0, 1.0];
        let a = select_n(&z, &f, lo, 100_000).unwrap().n;
        let b = select_n(&z, &f, hi, 100_000).unwrap().n;
        prop_assert!(a >= b);
        prop_assert_eq!(a % 2, 0);
    }

    #[test]
    fn replications_depend_only_on_seed_and_index(seed in any::<u64>(), r in 0u64..1000) {
        let m = SignalModel::new(vec![0.9f64, 0.7], vec![1.0, -0.5], 0.1, 8, seed).unwrap();
        prop_assert_eq!(generate(&m, r), generate(&m.clone(), r));
    }
}
