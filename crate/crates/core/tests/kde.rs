mod common;

use common::{d1, d2, linspace, rng};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use ratiokde::kde::{
    bandwidth_t_star, effective_size, empirical_density, extract_modes, fit_reference,
    gaussian_bandwidth, gaussian_estimate, pooled_correlation, proposed_estimate, FitResult,
};
use ratiokde::quad::GaussLegendre;
use ratiokde::ratio::density_equal_var;
use ratiokde::{DensityGrid, EigenSample, EqualVarSpec, Window};

fn normal_sample(seed: u64, n: usize, mean: f64, sd: f64) -> EigenSample {
    let mut g = rng(seed);
    let reps = (0..n)
        .map(|_| vec![mean + sd * g.sample::<f64, _>(StandardNormal)])
        .collect();
    EigenSample::from_ratios(reps).unwrap()
}

/// Draws of `w/v` with `(v, w)` jointly normal, equal variance `t`.
fn ratio_draws(seed: u64, n: usize, mu: f64, rho: f64, t: f64) -> Vec<f64> {
    let mut g = rng(seed);
    let s = t.sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = g.sample(StandardNormal);
            let z2: f64 = g.sample(StandardNormal);
            let v = 1.0 + s * z1;
            let w = mu + s * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
            w / v
        })
        .collect()
}

#[test]
fn gaussian_estimate_solves_heat_equation() {
    let sample = normal_sample(3, 60, 0.9, 0.05);
    let t = 1e-3;
    let at = |tt: f64, x: f64| gaussian_estimate(&sample, &[x], tt).unwrap().y[0];
    for x in linspace(0.75, 1.05, 31) {
        let ht = d1(|tt| at(tt, x), t, 1e-3 * t);
        let hxx = d2(|y| at(t, y), x, 1e-2 * t.sqrt());
        assert!((ht - 0.5 * hxx).abs() <= 1e-6 * (1.0 + ht.abs()), "x {x}: {ht} vs {}", 0.5 * hxx);
    }
}

#[test]
fn plug_in_bandwidth_near_normal_reference() {
    for seed in 0..5 {
        let sample = normal_sample(seed, 2000, 0.0, 1.0);
        let t = gaussian_bandwidth(&sample).unwrap();
        let reference = (4.0f64 / (3.0 * 2000.0)).powf(0.4);
        assert!(t / reference < 2.0 && reference / t < 2.0, "t+ {t} vs {reference}");
    }
}

#[test]
fn bandwidth_is_scale_equivariant() {
    let base = normal_sample(11, 500, 0.9, 0.03);
    let alpha = 3.5;
    let scaled = EigenSample::from_ratios(
        base.replications()
            .iter()
            .map(|r| r.iter().map(|p| alpha * p.ratio).collect())
            .collect(),
    )
    .unwrap();
    let a = gaussian_bandwidth(&base).unwrap();
    let b = gaussian_bandwidth(&scaled).unwrap();
    assert!((b / (alpha * alpha * a) - 1.0).abs() < 1e-9);
}

#[test]
fn pooled_correlation_recovers_rho() {
    let mut g = rng(5);
    let rho: f64 = 0.8;
    let reps: Vec<Vec<(f64, f64)>> = (0..100_000)
        .map(|_| {
            let z1: f64 = g.sample(StandardNormal);
            let z2: f64 = g.sample(StandardNormal);
            vec![(3.0 + z1, 2.0 + rho * z1 + (1.0 - rho * rho).sqrt() * z2)]
        })
        .collect();
    let est = pooled_correlation(&EigenSample::new(reps).unwrap()).unwrap();
    assert!((est - rho).abs() < 0.01, "{est}");
}

#[test]
fn fit_recovers_generating_parameters() {
    let (t, mu, rho) = (0.05, 0.9, 0.3);
    let draws = ratio_draws(7, 100_000, mu, rho, t);
    let sample = EigenSample::from_ratios(draws.into_iter().map(|x| vec![x]).collect()).unwrap();
    let hist = empirical_density(&sample, Window::new(0.2, 1.8).unwrap(), 160).unwrap();
    let fit = fit_reference(&hist).unwrap();
    assert!((fit.t0 / t - 1.0).abs() < 0.2, "{fit:?}");
    assert!((fit.mu0 - mu).abs() < 0.01, "{fit:?}");
    assert!((fit.rho0 - rho).abs() < 0.1, "{fit:?}");
    assert!(!fit.rho_at_boundary);
}

fn fit_at(t0: f64) -> FitResult<f64> {
    FitResult {
        t0,
        mu0: 0.0,
        rho0: 0.0,
        objective: 0.0,
        rho_at_boundary: false,
        starts: 0,
        iterations: 0,
    }
}

#[test]
fn t_star_single_component_oracle() {
    let (xi, rho, t0) = (0.9, 0.6, 0.02);
    let sample = EigenSample::from_ratios(vec![vec![xi]]).unwrap();
    let window = Window::new(0.5, 1.3).unwrap();
    let got = bandwidth_t_star(&sample, &fit_at(t0), rho, window).unwrap();

    let d = (1.0 + xi * xi - 2.0 * xi * rho).powi(2) / (2.0 * t0 * (1.0 - rho * rho));
    let spec = EqualVarSpec::new(1.0, xi, rho, t0).unwrap();
    let ht = |x: f64| d1(|t| density_equal_var(&spec.at_time(t).unwrap(), x), t0, 1e-3 * t0);
    let span = window.extended(0.2);
    let norm2 = GaussLegendre::new(20).integrate_composite(|x| ht(x).powi(2), span.lo, span.hi, 64);
    let expected = (1.0 / d.sqrt() / (2.0 * std::f64::consts::PI.sqrt() * norm2)).powf(0.4);
    assert!((got.t_star / expected - 1.0).abs() < 1e-6, "{} vs {expected}", got.t_star);
    assert_eq!(got.skipped, 0);
}

#[test]
fn t_star_scales_as_r_to_minus_two_fifths() {
    let base: Vec<Vec<f64>> = vec![vec![0.8, 0.91], vec![0.95], vec![0.88, 0.9, 0.97]];
    let window = Window::new(0.75, 1.0).unwrap();
    let one = EigenSample::from_ratios(base.clone()).unwrap();
    let k = 16;
    let many = EigenSample::from_ratios(base.iter().cycle().take(base.len() * k).cloned().collect())
        .unwrap();
    let a = bandwidth_t_star(&one, &fit_at(0.05), 0.9, window).unwrap().t_star;
    let b = bandwidth_t_star(&many, &fit_at(0.05), 0.9, window).unwrap().t_star;
    assert!((b / a - (k as f64).powf(-0.4)).abs() < 1e-12);
}

#[test]
fn mixture_is_linear_in_replications() {
    let x = linspace(0.7, 1.0, 50);
    let a = EigenSample::from_ratios(vec![vec![0.8, 0.9], vec![0.95]]).unwrap();
    let b = EigenSample::from_ratios(vec![vec![0.85], vec![0.92, 0.93, 0.99]]).unwrap();
    let merged = a.merged(&b);
    let (ha, hb, hm) = (
        proposed_estimate(&a, 0.9, 1e-3, &x).unwrap(),
        proposed_estimate(&b, 0.9, 1e-3, &x).unwrap(),
        proposed_estimate(&merged, 0.9, 1e-3, &x).unwrap(),
    );
    for i in 0..x.len() {
        let avg = 0.5 * (ha.y[i] + hb.y[i]);
        assert!((hm.y[i] - avg).abs() <= 1e-12 * (1.0 + avg));
    }
}

#[test]
fn empty_replications_do_not_dilute_weights() {
    let s = EigenSample::from_ratios(vec![vec![0.9], vec![], vec![0.8, 0.85]]).unwrap();
    assert_eq!(s.r(), 3);
    assert_eq!(s.effective_r(), 2);
    let w = s.weighted().unwrap();
    let total: f64 = w.iter().map(|p| p.1).sum();
    assert!((total - 1.0).abs() < 1e-15);
    assert_eq!(w[0].1, 0.5);
    assert!((effective_size(&w) - 1.0 / (0.25 + 2.0 * 0.0625)).abs() < 1e-12);
}

#[test]
fn proposed_estimate_carries_unit_mass() {
    let sample = EigenSample::from_ratios(vec![vec![0.8, 0.9], vec![0.95], vec![0.85]]).unwrap();
    let x = linspace(-2.0, 4.0, 60_001);
    let h = proposed_estimate(&sample, 0.95, 1e-3, &x).unwrap();
    // The ratio density has 1/x² tails; the remainder outside the grid is small.
    let m = h.trapezoid();
    assert!(m > 0.99 && m <= 1.0 + 1e-9, "{m}");
}

#[test]
fn empty_mode_list_when_threshold_above_peak() {
    let g = DensityGrid::new(linspace(0.0, 1.0, 11), vec![0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(extract_modes(&g, 0.1).unwrap().len(), 2);
    assert_eq!(extract_modes(&g, 0.7).unwrap().len(), 1);
    assert!(extract_modes(&g, 5.0).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modes_invariant_under_rescaling(ys in prop::collection::vec(0.0f64..10.0, 5..60), k in -6i32..7) {
        let c = 2f64.powi(k);
        let x = linspace(0.0, 1.0, ys.len());
        let a = extract_modes(&DensityGrid::new(x.clone(), ys.clone()).unwrap(), 1.0).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| y * c).collect();
        let b = extract_modes(&DensityGrid::new(x, scaled).unwrap(), c).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (m, n) in a.iter().zip(&b) {
            prop_assert_eq!(m.x, n.x);
        }
    }

    #[test]
    fn weights_sum_to_one(reps in prop::collection::vec(prop::collection::vec(0.5f64..1.5, 0..6), 1..30)) {
        prop_assume!(reps.iter().any(|r| !r.is_empty()));
        let s = EigenSample::from_ratios(reps).unwrap();
        let total: f64 = s.weighted().unwrap().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_mass_matches_window_capture(seed in any::<u64>()) {
        let s = normal_sample(seed, 300, 0.9, 0.1);
        let h = empirical_density(&s, Window::new(0.75, 1.0).unwrap(), 64).unwrap();
        let mass: f64 = h.grid.y.iter().sum::<f64>() * h.bin_width();
        prop_assert!((mass - h.captured).abs() < 1e-12);
        let inside = s.total_pairs() - h.outside;
        prop_assert!((h.captured - inside as f64 / 300.0).abs() < 1e-12);
    }
}
