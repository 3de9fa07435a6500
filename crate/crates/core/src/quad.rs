//! Quadrature rules: adaptive Simpson, Gauss-Legendre, and a whole-line
//! integral through the substitution `x = tan u`.

use crate::scalar::{from_usize, lit, Real};

/// Adaptive Simpson on `[a, b]`, seeded with `panels` equal sub-intervals so
/// narrow features are not stepped over.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T, panels: usize) -> T {
    let panels = panels.max(1);
    let h = (b - a) / from_usize(panels);
    let ptol = tol / from_usize(panels);
    (0..panels)
        .map(|i| {
            let lo = a + h * from_usize(i);
            let hi = if i + 1 == panels { b } else { lo + h };
            let mid = (lo + hi) * lit(0.5);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            let whole = (hi - lo) / lit(6.0) * (flo + lit::<T>(4.0) * fmid + fhi);
            simpson_step(&f, lo, hi, flo, fmid, fhi, whole, ptol, 48)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let m = (a + b) * lit(0.5);
    let lm = (a + m) * lit(0.5);
    let rm = (m + b) * lit(0.5);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / lit(6.0) * (fa + lit::<T>(4.0) * flm + fm);
    let right = (b - m) / lit(6.0) * (fm + lit::<T>(4.0) * frm + fb);
    let delta = left + right - whole;
    // Also stop once the correction is at rounding level of the panel sum.
    let floor = lit::<T>(64.0) * T::epsilon() * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= lit::<T>(15.0) * tol || delta.abs() <= floor {
        return left + right + delta / lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol * lit(0.5), depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol * lit(0.5), depth - 1)
}

/// `∫_ℝ f(x) dx` via `x = tan u` on `(-π/2, π/2)`; suited to integrands with
/// `1/x²` tails.
pub fn integrate_real_line<T: Real, F: Fn(T) -> T>(f: F, tol: T, panels: usize) -> T {
    let half_pi = T::FRAC_PI_2();
    let g = |u: T| {
        if u.abs() >= half_pi {
            return T::zero();
        }
        let c = u.cos();
        let v = f(u.tan()) / (c * c);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    adaptive_simpson(g, -half_pi, half_pi, tol, panels)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf: T = from_usize(n);
        for i in 0..n.div_ceil(2) {
            let mut x = (T::PI() * (from_usize::<T>(i) + lit(0.75)) / (nf + lit(0.5))).cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= T::epsilon() * lit(4.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    /// Composite rule: `panels` equal panels on `[a, b]`, this rule on each.
    pub fn integrate_composite<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T, panels: usize) -> T {
        let h = (b - a) / from_usize(panels.max(1));
        let mut total = T::zero();
        for p in 0..panels.max(1) {
            let lo = a + h * from_usize(p);
            let mid = lo + h * lit(0.5);
            let half = h * lit(0.5);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                total = total + *w * f(mid + half * *x) * half;
            }
        }
        total
    }
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf: T = from_usize(k);
        let p2 = ((lit::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf: T = from_usize(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}
