#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratiokde::{EqualVarSpec, GeneralGaussianSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Equal-variance specs with `ν_v = 1`, `ν_w ∈ [−2, 2]`, `|ρ| ≤ 0.9`, and
/// `t` log-uniform on `[0.02, 2]`.
pub fn equal_var_specs(seed: u64, count: usize) -> Vec<EqualVarSpec> {
    let mut g = rng(seed);
    (0..count)
        .map(|_| {
            let nu_w = g.random_range(-2.0..2.0);
            let rho = g.random_range(-0.9..0.9);
            let t = (g.random_range(0.02f64.ln()..2.0f64.ln())).exp();
            EqualVarSpec::new(1.0, nu_w, rho, t).unwrap()
        })
        .collect()
}

/// General specs with `|ν| ≤ 2`, variances in `[0.1, 2]` and correlation
/// `|γ|/σ_vσ_w ≤ 0.9`.
pub fn general_specs(seed: u64, count: usize) -> Vec<GeneralGaussianSpec> {
    let mut g = rng(seed);
    (0..count)
        .map(|_| {
            let nu_v = g.random_range(-2.0..2.0);
            let nu_w = g.random_range(-2.0..2.0);
            let s2v = g.random_range(0.1..2.0);
            let s2w = g.random_range(0.1..2.0);
            let c: f64 = g.random_range(-0.9..0.9);
            GeneralGaussianSpec::new(nu_v, nu_w, s2v, s2w, c * f64::sqrt(s2v * s2w)).unwrap()
        })
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Five-point central first derivative.
pub fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Five-point central second derivative.
pub fn d2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// All complex roots `(re, im)` of a polynomial with ascending real
/// coefficients, by Durand–Kerner iteration.
pub fn poly_roots(coef: &[f64]) -> Vec<(f64, f64)> {
    let n = coef.len() - 1;
    let lead = coef[n];
    let c: Vec<f64> = coef.iter().map(|v| v / lead).collect();
    let eval = |z: (f64, f64)| {
        let mut acc = (0.0, 0.0);
        for &a in c.iter().rev() {
            acc = (acc.0 * z.0 - acc.1 * z.1 + a, acc.0 * z.1 + acc.1 * z.0);
        }
        acc
    };
    let mut z: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let r: f64 = 0.4f64.hypot(0.9).powi(k as i32);
            let a = 0.9f64.atan2(0.4) * k as f64;
            (r * a.cos(), r * a.sin())
        })
        .collect();
    for _ in 0..500 {
        for i in 0..n {
            let num = eval(z[i]);
            let mut den = (1.0, 0.0);
            for j in 0..n {
                if i != j {
                    let d = (z[i].0 - z[j].0, z[i].1 - z[j].1);
                    den = (den.0 * d.0 - den.1 * d.1, den.0 * d.1 + den.1 * d.0);
                }
            }
            let m = den.0 * den.0 + den.1 * den.1;
            let q = ((num.0 * den.0 + num.1 * den.1) / m, (num.1 * den.0 - num.0 * den.1) / m);
            z[i] = (z[i].0 - q.0, z[i].1 - q.1);
        }
    }
    z
}
