//! Condensed-density estimation from pooled generalized eigenvalues: the
//! empirical histogram, the Gaussian-kernel baseline, and the mixture of exact
//! ratio densities with fitted reference parameters and plug-in bandwidth.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{Minimum, NelderMead};
use crate::pde::CoefficientField;
use crate::pencil::RealPair;
use crate::quad::GaussLegendre;
use crate::ratio::{density_equal_var, time_derivative, EqualVarSpec};
use crate::scalar::{from_usize, lit, Real};

/// Real generalized eigenvalues of `R` replications.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSample<T> {
    replications: Vec<Vec<RealPair<T>>>,
}

impl<T: Real> EigenSample<T> {
    /// Ratios are recomputed from the pairs; pairs with `t = 0` are rejected.
    pub fn new(replications: Vec<Vec<(T, T)>>) -> Result<Self> {
        let replications = replications
            .into_iter()
            .map(|rep| {
                rep.into_iter()
                    .map(|(s, t)| {
                        if t == T::zero() || !s.is_finite() || !t.is_finite() {
                            return Err(Error::invalid(format!("non-finite pair ({s}, {t})")));
                        }
                        Ok(RealPair { s, t, ratio: s / t })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { replications })
    }

    /// Pairs as produced by [`crate::pencil::real_pairs`].
    pub fn from_pairs(replications: Vec<Vec<RealPair<T>>>) -> Result<Self> {
        Self::new(
            replications
                .into_iter()
                .map(|rep| rep.into_iter().map(|p| (p.s, p.t)).collect())
                .collect(),
        )
    }

    /// Eigenvalues only, with `s = ξ`, `t = 1`.
    pub fn from_ratios(replications: Vec<Vec<T>>) -> Result<Self> {
        Self::new(
            replications
                .into_iter()
                .map(|rep| rep.into_iter().map(|x| (x, T::one())).collect())
                .collect(),
        )
    }

    pub fn replications(&self) -> &[Vec<RealPair<T>>] {
        &self.replications
    }

    /// Replication count `R`, including replications without real pairs.
    pub fn r(&self) -> usize {
        self.replications.len()
    }

    /// Replications contributing at least one eigenvalue.
    pub fn effective_r(&self) -> usize {
        self.replications.iter().filter(|r| !r.is_empty()).count()
    }

    pub fn p_r(&self) -> Vec<usize> {
        self.replications.iter().map(Vec::len).collect()
    }

    pub fn total_pairs(&self) -> usize {
        self.replications.iter().map(Vec::len).sum()
    }

    /// Concatenation of the replications of both samples.
    pub fn merged(&self, other: &Self) -> Self {
        let mut replications = self.replications.clone();
        replications.extend(other.replications.iter().cloned());
        Self { replications }
    }

    /// The first `r` replications.
    pub fn truncated(&self, r: usize) -> Self {
        Self {
            replications: self.replications[..r.min(self.r())].to_vec(),
        }
    }

    /// Every pair with its mixture weight `1/(R_eff p_r)`; weights sum to 1.
    pub fn weighted(&self) -> Result<Vec<(RealPair<T>, T)>> {
        let r_eff = self.effective_r();
        if r_eff == 0 {
            return Err(Error::Degenerate("sample has no real eigenvalues".into()));
        }
        let r_eff = from_usize::<T>(r_eff);
        Ok(self
            .replications
            .iter()
            .filter(|rep| !rep.is_empty())
            .flat_map(|rep| {
                let w = T::one() / (r_eff * from_usize::<T>(rep.len()));
                rep.iter().map(move |p| (*p, w))
            })
            .collect())
    }
}

/// Evaluation interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Window<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("window needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// Centers of `m` equal bins.
    pub fn centers(&self, m: usize) -> Vec<T> {
        let w = self.width() / from_usize(m);
        (0..m)
            .map(|i| self.lo + (from_usize::<T>(i) + lit(0.5)) * w)
            .collect()
    }

    /// Symmetric extension by `frac` of the width in total.
    pub fn extended(&self, frac: T) -> Self {
        let pad = self.width() * frac * lit(0.5);
        Self {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }
}

/// Density values on increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> DensityGrid<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::invalid("x and y must be non-empty and of equal length"));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("abscissae must be strictly increasing"));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn trapezoid(&self) -> T {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * lit(0.5))
            .sum()
    }
}

/// Binned empirical condensed density.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    pub window: Window<T>,
    /// Bin centers and densities.
    pub grid: DensityGrid<T>,
    /// Eigenvalues outside the window.
    pub outside: usize,
    /// Total weight inside the window.
    pub captured: T,
}

impl<T: Real> Histogram<T> {
    pub fn bin_width(&self) -> T {
        self.window.width() / from_usize(self.grid.len())
    }
}

/// Histogram density: each eigenvalue adds `1/(R p_r Δ)` to its bin.
pub fn empirical_density<T: Real>(
    sample: &EigenSample<T>,
    window: Window<T>,
    bins: usize,
) -> Result<Histogram<T>> {
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    let weighted = sample.weighted()?;
    let dx = window.width() / from_usize(bins);
    let mut y = vec![T::zero(); bins];
    let mut outside = 0;
    let mut captured = T::zero();
    for (p, w) in weighted {
        let x = p.ratio;
        if !(x >= window.lo && x < window.hi) {
            outside += 1;
            continue;
        }
        let k = ((x - window.lo) / dx).floor().to_usize().unwrap_or(0).min(bins - 1);
        y[k] = y[k] + w / dx;
        captured = captured + w;
    }
    Ok(Histogram {
        window,
        grid: DensityGrid::new(window.centers(bins), y)?,
        outside,
        captured,
    })
}

/// `exp(−(x−ξ)²/(2t))/√(2πt)`.
#[inline]
pub fn gaussian_kernel<T: Real>(x: T, xi: T, t: T) -> T {
    let u = x - xi;
    (-(u * u) / (lit::<T>(2.0) * t)).exp() / (T::TAU() * t).sqrt()
}

/// `Ĥ_G(x, t)` at one abscissa.
pub fn gaussian_mixture_at<T: Real>(weighted: &[(RealPair<T>, T)], x: T, t: T) -> T {
    weighted
        .iter()
        .fold(T::zero(), |acc, (p, w)| acc + *w * gaussian_kernel(x, p.ratio, t))
}

/// Gaussian-kernel estimate with variance bandwidth `t_plus`.
pub fn gaussian_estimate<T: Real>(
    sample: &EigenSample<T>,
    x: &[T],
    t_plus: T,
) -> Result<DensityGrid<T>> {
    if !(t_plus > T::zero() && t_plus.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {t_plus}")));
    }
    let weighted = sample.weighted()?;
    let y = x
        .par_iter()
        .map(|&xi| gaussian_mixture_at(&weighted, xi, t_plus))
        .collect();
    DensityGrid::new(x.to_vec(), y)
}

/// Kish effective size `(Σw)²/Σw²` of the mixture weights.
pub fn effective_size<T: Real>(weighted: &[(RealPair<T>, T)]) -> T {
    let s: T = weighted.iter().map(|(_, w)| *w).sum();
    let s2: T = weighted.iter().map(|(_, w)| *w * *w).sum();
    s * s / s2
}

fn weighted_quantile<T: Real>(sorted: &[(T, T)], q: T) -> T {
    let total: T = sorted.iter().map(|(_, w)| *w).sum();
    let target = q * total;
    let mut acc = T::zero();
    for &(x, w) in sorted {
        acc = acc + w;
        if acc >= target {
            return x;
        }
    }
    sorted.last().expect("non-empty").0
}

/// `Σᵢⱼ wᵢwⱼ φ_g^{(r)}(ξᵢ − ξⱼ)` for `r ∈ {4, 6}`.
fn psi_estimate<T: Real>(pts: &[(T, T)], g: T, r: u32) -> T {
    let norm = T::one() / T::TAU().sqrt();
    let scale = g.powi(-(r as i32) - 1);
    let deriv = |u: T| -> T {
        let u2 = u * u;
        let poly = match r {
            4 => u2 * u2 - lit::<T>(6.0) * u2 + lit(3.0),
            _ => u2 * u2 * u2 - lit::<T>(15.0) * u2 * u2 + lit::<T>(45.0) * u2 - lit(15.0),
        };
        poly * norm * (-u2 * lit(0.5)).exp()
    };
    let total: T = pts
        .par_iter()
        .map(|&(xi, wi)| {
            pts.iter()
                .fold(T::zero(), |acc, &(xj, wj)| acc + wj * deriv((xi - xj) / g))
                * wi
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    total * scale
}

/// Two-stage direct plug-in bandwidth (variance units) for the Gaussian
/// estimator: normal-reference `ψ₈`, kernel estimates of `ψ₆` and
/// `ψ₄ = ‖Ĥ''‖²`, then `t⁺ = (2 n √π ψ₄)^{−2/5}` with `n` the effective size
/// of the mixture weights.
pub fn gaussian_bandwidth<T: Real>(sample: &EigenSample<T>) -> Result<T> {
    let weighted = sample.weighted()?;
    let mut pts: Vec<(T, T)> = weighted.iter().map(|(p, w)| (p.ratio, *w)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    if pts.first().map(|p| p.0) == pts.last().map(|p| p.0) {
        return Err(Error::Degenerate("all eigenvalues are equal".into()));
    }
    let n = effective_size(&weighted);
    let mean: T = pts.iter().map(|(x, w)| *x * *w).sum();
    let var: T = pts.iter().map(|(x, w)| *w * (*x - mean) * (*x - mean)).sum();
    let iqr = weighted_quantile(&pts, lit(0.75)) - weighted_quantile(&pts, lit(0.25));
    let robust = iqr / lit(1.349);
    let sigma = if robust > T::zero() { var.sqrt().min(robust) } else { var.sqrt() };
    if !(sigma > T::zero()) {
        return Err(Error::Degenerate("zero spread in eigenvalues".into()));
    }
    let sqrt_pi = T::PI().sqrt();
    let sqrt_2pi = T::TAU().sqrt();
    let psi8 = lit::<T>(105.0) / (lit::<T>(32.0) * sqrt_pi * sigma.powi(9));
    let g1 = (lit::<T>(30.0) / (sqrt_2pi * psi8 * n)).powf(lit(1.0 / 9.0));
    let psi6 = psi_estimate(&pts, g1, 6);
    if !(psi6 < T::zero()) {
        return Err(Error::Degenerate(format!("pilot psi6 = {psi6} is not negative")));
    }
    let g2 = (lit::<T>(-6.0) / (sqrt_2pi * psi6 * n)).powf(lit(1.0 / 7.0));
    let psi4 = psi_estimate(&pts, g2, 4);
    if !(psi4 > T::zero()) {
        return Err(Error::Degenerate(format!("psi4 = {psi4} is not positive")));
    }
    Ok((lit::<T>(2.0) * n * sqrt_pi * psi4).powf(lit(-0.4)))
}

/// Sample correlation of the pooled `(S_kk, T_kk)` pairs.
pub fn pooled_correlation<T: Real>(sample: &EigenSample<T>) -> Result<T> {
    let pairs: Vec<(T, T)> = sample
        .replications()
        .iter()
        .flatten()
        .map(|p| (p.s, p.t))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Degenerate("need at least 2 pooled pairs".into()));
    }
    let n = from_usize::<T>(pairs.len());
    let ms = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let mt = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let (mut ss, mut tt, mut st) = (T::zero(), T::zero(), T::zero());
    for &(s, t) in &pairs {
        let (ds, dt) = (s - ms, t - mt);
        ss = ss + ds * ds;
        tt = tt + dt * dt;
        st = st + ds * dt;
    }
    if ss == T::zero() || tt == T::zero() {
        return Err(Error::Degenerate("zero variance in pooled pairs".into()));
    }
    Ok((st / (ss * tt).sqrt()).max(-T::one()).min(T::one()))
}

/// Reference parameters `(t₀, μ₀ = ν_w/ν_v, ρ₀)` with `ν_v = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub t0: T,
    pub mu0: T,
    pub rho0: T,
    /// `Σ (h(x_b) − H_e(x_b))² Δ`.
    pub objective: T,
    /// `|ρ₀|` reached the representable limit below 1: the objective keeps
    /// decreasing towards the degenerate `|ρ| = 1` edge of the family.
    pub rho_at_boundary: bool,
    pub starts: usize,
    pub iterations: usize,
}

/// `1 − |ρ₀|` at or below which a fit is flagged as on the boundary.
pub const RHO_BOUNDARY_TOL: f64 = 1e-12;

/// Discrete L2 distance between `h(·; t, μ, ρ)` and the histogram.
pub fn fit_objective<T: Real>(hist: &Histogram<T>, t: T, mu: T, rho: T) -> T {
    let Ok(spec) = EqualVarSpec::new(T::one(), mu, rho, t) else {
        return T::infinity();
    };
    let dx = hist.bin_width();
    hist.grid
        .x
        .iter()
        .zip(&hist.grid.y)
        .map(|(&x, &y)| {
            let d = density_equal_var(&spec, x) - y;
            d * d
        })
        .sum::<T>()
        * dx
}

/// Unconstrained coordinates `(ln t, μ, atanh ρ)`.
fn decode<T: Real>(z: &[T]) -> (T, T, T) {
    (z[0].exp(), z[1], z[2].tanh())
}

/// Multi-start simplex minimization of [`fit_objective`].
pub fn fit_reference<T: Real>(hist: &Histogram<T>) -> Result<FitResult<T>> {
    fit_reference_with(hist, &NelderMead::default())
}

pub fn fit_reference_with<T: Real>(
    hist: &Histogram<T>,
    nm: &NelderMead<T>,
) -> Result<FitResult<T>> {
    let nonempty = hist.grid.y.iter().filter(|y| **y > T::zero()).count();
    if nonempty < 8 {
        return Err(Error::Degenerate(format!(
            "histogram has {nonempty} non-empty bins, need 8"
        )));
    }
    let (x, y) = (&hist.grid.x, &hist.grid.y);
    let mass: T = y.iter().copied().sum();
    let mean = x.iter().zip(y).map(|(a, b)| *a * *b).sum::<T>() / mass;
    let var = x
        .iter()
        .zip(y)
        .map(|(a, b)| *b * (*a - mean) * (*a - mean))
        .sum::<T>()
        / mass;
    let var = var.max(hist.bin_width() * hist.bin_width());
    let mode = x[y
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > y[best] { i } else { best })];

    let objective = |z: &[T]| {
        let (t, mu, rho) = decode(z);
        fit_objective(hist, t, mu, rho)
    };
    let steps = [lit::<T>(1.0), hist.window.width() * lit(0.2), lit(0.5)];
    let mut starts = Vec::new();
    for t in [lit::<T>(0.1) * var, var] {
        for mu in [mode, mean] {
            for rho in [T::zero(), lit(0.5), lit(-0.5)] {
                starts.push([t.ln(), mu, rho.atanh()]);
            }
        }
    }

    let mut best: Option<Minimum<T>> = None;
    let mut any_converged = false;
    let mut iterations = 0;
    for s in &starts {
        let mut m = nm.minimize(objective, s, &steps)?;
        // A restart from the reported point guards against simplex collapse.
        let again = nm.minimize(objective, &m.point, &steps)?;
        iterations += m.iterations + again.iterations;
        if again.value <= m.value {
            m = Minimum {
                converged: again.converged,
                ..again
            };
        }
        any_converged |= m.converged;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    if !any_converged {
        return Err(Error::NoConvergence {
            iterations,
            best_objective: best.value.to_f64().unwrap_or(f64::NAN),
            best_point: best.point.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        });
    }
    let (t0, mu0, rho0) = decode(&best.point);
    Ok(FitResult {
        t0,
        mu0,
        rho0,
        objective: fit_objective(hist, t0, mu0, rho0),
        rho_at_boundary: T::one() - rho0.abs() <= lit(RHO_BOUNDARY_TOL),
        starts: starts.len(),
        iterations,
    })
}

/// Plug-in bandwidth of the proposed estimator with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TStar<T> {
    pub t_star: T,
    /// Component average of `1/√D(ξ, t₀)`.
    pub mean_inv_sqrt_d: T,
    /// Component average of `‖h_t(·, t₀)‖²`.
    pub mean_ht_norm2: T,
    pub skipped: usize,
}

/// Gauss–Legendre nodes per panel and panel count for `‖h_t‖²`.
pub const T_STAR_NODES: usize = 8;
pub const T_STAR_PANELS: usize = 16;

/// `t* = (E[1/√D] / (2R√π ‖h_t‖²))^{2/5}` at `t₀` with per-component
/// `ν_w = ξ`, `ν_v = 1`, `ρ = ρ̂`; `D` is evaluated at each component's center
/// and `‖h_t‖²` over the window extended by 20%.
pub fn bandwidth_t_star<T: Real>(
    sample: &EigenSample<T>,
    fit: &FitResult<T>,
    rho_hat: T,
    window: Window<T>,
) -> Result<TStar<T>> {
    if !(rho_hat.abs() < T::one()) {
        return Err(Error::invalid(format!("|rho_hat| must be < 1, got {rho_hat}")));
    }
    if !(fit.t0 > T::zero()) {
        return Err(Error::invalid("t0 must be > 0"));
    }
    let weighted = sample.weighted()?;
    let gl = GaussLegendre::<T>::new(T_STAR_NODES);
    let span = window.extended(lit(0.2));
    let per_component: Vec<Option<(T, T, T)>> = weighted
        .par_iter()
        .map(|(p, w)| {
            let spec = EqualVarSpec::new(T::one(), p.ratio, rho_hat, fit.t0).ok()?;
            let d = CoefficientField::new(&spec).ok()?.at(p.ratio).ok()?.d;
            if !(d > T::zero() && d.is_finite()) {
                return None;
            }
            let mut failed = false;
            let norm2 = gl.integrate_composite(
                |x| match time_derivative(&spec, x) {
                    Ok(v) => v * v,
                    Err(_) => {
                        failed = true;
                        T::zero()
                    }
                },
                span.lo,
                span.hi,
                T_STAR_PANELS,
            );
            if failed || !norm2.is_finite() {
                return None;
            }
            Some((*w, T::one() / d.sqrt(), norm2))
        })
        .collect();
    let kept: Vec<(T, T, T)> = per_component.iter().flatten().copied().collect();
    let skipped = per_component.len() - kept.len();
    let wsum: T = kept.iter().map(|k| k.0).sum();
    if kept.is_empty() || !(wsum > T::zero()) {
        return Err(Error::Degenerate("every component was skipped in t*".into()));
    }
    let e = kept.iter().map(|k| k.0 * k.1).sum::<T>() / wsum;
    let n2 = kept.iter().map(|k| k.0 * k.2).sum::<T>() / wsum;
    let r = from_usize::<T>(sample.effective_r());
    let t_star = (e / (lit::<T>(2.0) * r * T::PI().sqrt() * n2)).powf(lit(0.4));
    if !(t_star > T::zero() && t_star.is_finite()) {
        return Err(Error::Degenerate(format!("t* = {t_star}")));
    }
    Ok(TStar {
        t_star,
        mean_inv_sqrt_d: e,
        mean_ht_norm2: n2,
        skipped,
    })
}

/// `Ĥ_P(x, t)`: weighted mixture of `h(x, t; ν_v = 1, ν_w = ξ, ρ̂)`.
pub fn proposed_estimate<T: Real>(
    sample: &EigenSample<T>,
    rho_hat: T,
    t_star: T,
    x: &[T],
) -> Result<DensityGrid<T>> {
    let components = proposed_components(sample, rho_hat, t_star)?;
    let y = x
        .par_iter()
        .map(|&xi| {
            components
                .iter()
                .fold(T::zero(), |acc, (spec, w)| acc + *w * density_equal_var(spec, xi))
        })
        .collect();
    DensityGrid::new(x.to_vec(), y)
}

/// Component specs and weights of the proposed mixture.
pub fn proposed_components<T: Real>(
    sample: &EigenSample<T>,
    rho_hat: T,
    t_star: T,
) -> Result<Vec<(EqualVarSpec<T>, T)>> {
    sample
        .weighted()?
        .into_iter()
        .map(|(p, w)| Ok((EqualVarSpec::new(T::one(), p.ratio, rho_hat, t_star)?, w)))
        .collect()
}

/// A local maximum of a density grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode<T> {
    pub x: T,
    pub height: T,
}

/// Interior strict local maxima above `tau`, in increasing `x`. A flat run of
/// equal values bounded by lower neighbours counts once, at its midpoint.
pub fn extract_modes<T: Real>(density: &DensityGrid<T>, tau: T) -> Result<Vec<Mode<T>>> {
    let (x, y) = (&density.x, &density.y);
    if x.len() < 3 {
        return Err(Error::invalid("mode extraction needs at least 3 grid points"));
    }
    let mut modes = Vec::new();
    let mut i = 1;
    while i < y.len() - 1 {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < y.len() && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < y.len() && y[j + 1] < y[i] && y[i] > tau {
                modes.push(Mode {
                    x: (x[i] + x[j]) * lit(0.5),
                    height: y[i],
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(modes)
}
