//! Density of the ratio `w / v` of two jointly Gaussian variables.
//!
//! Two parametrizations are provided. [`GeneralGaussianSpec`] carries an
//! arbitrary positive-definite covariance. [`EqualVarSpec`] fixes a common
//! variance `t` and correlation `ρ`; in that family the density evolves in `t`
//! by a diffusion equation (see [`crate::pde`]), and its analytic `x`- and
//! `t`-derivatives are available through [`derivatives`].
//!
//! The equal-variance density is evaluated primarily through a closed form in
//! `erf`, which stays accurate when the Kummer argument `b²/a` is large. The
//! `₁F₁` form is kept as an independent path ([`density_equal_var_hyp`]).

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};
use crate::specfun::{
    erf, erfc, hyp1f1_scaled_checked, moment_l_scaled, moment_recurrence, KummerLower, MomentParams,
};

/// Means, variances and covariance of the pair `(v, w)`; the ratio is `w / v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralGaussianSpec<T> {
    pub nu_v: T,
    pub nu_w: T,
    pub sigma2_v: T,
    pub sigma2_w: T,
    pub gamma: T,
}

impl<T: Real> GeneralGaussianSpec<T> {
    pub fn new(nu_v: T, nu_w: T, sigma2_v: T, sigma2_w: T, gamma: T) -> Result<Self> {
        let spec = Self {
            nu_v,
            nu_w,
            sigma2_v,
            sigma2_w,
            gamma,
        };
        if ![nu_v, nu_w, sigma2_v, sigma2_w, gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("Gaussian parameters must be finite"));
        }
        if !(sigma2_v > T::zero() && sigma2_w > T::zero()) {
            return Err(Error::invalid("variances must be positive"));
        }
        if !(spec.det() > T::zero()) {
            return Err(Error::invalid(format!(
                "covariance must be positive definite, |Σ| = {}",
                spec.det()
            )));
        }
        Ok(spec)
    }

    /// `|Σ| = σ²_v σ²_w − γ²`.
    pub fn det(&self) -> T {
        self.sigma2_v * self.sigma2_w - self.gamma * self.gamma
    }
}

/// Equal-variance family: `σ²_v = σ²_w = t`, covariance `ρt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualVarSpec<T> {
    pub nu_v: T,
    pub nu_w: T,
    pub rho: T,
    pub t: T,
}

impl<T: Real> EqualVarSpec<T> {
    pub fn new(nu_v: T, nu_w: T, rho: T, t: T) -> Result<Self> {
        if ![nu_v, nu_w, rho, t].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("ratio density parameters must be finite"));
        }
        if !(rho.abs() < T::one()) {
            return Err(Error::invalid(format!("|rho| must be < 1, got {rho}")));
        }
        if !(t > T::zero()) {
            return Err(Error::invalid(format!("t must be > 0, got {t}")));
        }
        Ok(Self { nu_v, nu_w, rho, t })
    }

    /// Same means and correlation at another time.
    pub fn at_time(&self, t: T) -> Result<Self> {
        Self::new(self.nu_v, self.nu_w, self.rho, t)
    }

    /// The covariance form of this spec.
    pub fn to_general(&self) -> GeneralGaussianSpec<T> {
        GeneralGaussianSpec {
            nu_v: self.nu_v,
            nu_w: self.nu_w,
            sigma2_v: self.t,
            sigma2_w: self.t,
            gamma: self.rho * self.t,
        }
    }

    pub(crate) fn require_nonzero_nu_v(&self) -> Result<()> {
        if self.nu_v == T::zero() {
            return Err(Error::invalid("nu_v must be nonzero"));
        }
        Ok(())
    }

    /// `x² − 2ρx + 1`, positive for `|ρ| < 1`.
    #[inline]
    pub(crate) fn r(&self, x: T) -> T {
        x * x - lit::<T>(2.0) * self.rho * x + T::one()
    }

    /// `1 − ρ²`.
    #[inline]
    pub(crate) fn one_m_rho2(&self) -> T {
        T::one() - self.rho * self.rho
    }
}

/// `a(x)`, `b(x)`, `c`, and `d = |Σ|` of the exponent `−aλ² + 2bλ − c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> AbcCoefficients<T> {
    pub fn z(&self) -> T {
        self.b * self.b / self.a
    }
}

pub fn abc_general<T: Real>(spec: &GeneralGaussianSpec<T>, x: T) -> AbcCoefficients<T> {
    let GeneralGaussianSpec {
        nu_v,
        nu_w,
        sigma2_v,
        sigma2_w,
        gamma,
    } = *spec;
    let d = spec.det();
    let two_d = lit::<T>(2.0) * d;
    AbcCoefficients {
        a: (sigma2_w - lit::<T>(2.0) * gamma * x + sigma2_v * x * x) / two_d,
        b: (sigma2_w * nu_v - gamma * nu_w - gamma * nu_v * x + sigma2_v * nu_w * x) / two_d,
        c: (sigma2_w * nu_v * nu_v - lit::<T>(2.0) * gamma * nu_w * nu_v + sigma2_v * nu_w * nu_w)
            / two_d,
        d,
    }
}

pub fn abc_equal_var<T: Real>(spec: &EqualVarSpec<T>, x: T) -> AbcCoefficients<T> {
    let EqualVarSpec { nu_v, nu_w, rho, t } = *spec;
    let q = spec.one_m_rho2();
    let den = lit::<T>(2.0) * q * t;
    AbcCoefficients {
        a: spec.r(x) / den,
        b: (nu_v - rho * nu_w + (nu_w - rho * nu_v) * x) / den,
        c: (nu_v * nu_v - lit::<T>(2.0) * rho * nu_w * nu_v + nu_w * nu_w) / den,
        d: q * t * t,
    }
}

/// `b²/a − c`: minus half the Mahalanobis distance from the mean to the line
/// `w = xv`. Computed directly to avoid cancelling two large numbers.
fn log_peak_general<T: Real>(spec: &GeneralGaussianSpec<T>, x: T) -> T {
    let num = spec.nu_w - spec.nu_v * x;
    let den = spec.sigma2_w - lit::<T>(2.0) * spec.gamma * x + spec.sigma2_v * x * x;
    -(num * num) / (lit::<T>(2.0) * den)
}

/// Density of `w / v` for a general covariance, through `₁F₁(1; 1/2; b²/a)`.
pub fn density_general<T: Real>(spec: &GeneralGaussianSpec<T>, x: T) -> T {
    let abc = abc_general(spec, x);
    let m = hyp1f1_scaled_checked(2, KummerLower::Half, abc.z());
    let pref = T::one() / (lit::<T>(2.0) * T::PI() * abc.d.sqrt() * abc.a);
    // e^{-c} ₁F₁ = e^{z-c} (e^{-z} ₁F₁)
    pref * log_peak_general(spec, x).exp() * m
}

/// Equal-variance density through the `₁F₁` form.
pub fn density_equal_var_hyp<T: Real>(spec: &EqualVarSpec<T>, x: T) -> T {
    density_general(&spec.to_general(), x)
}

/// Equal-variance density through the closed form in `erf`.
pub fn density_equal_var<T: Real>(spec: &EqualVarSpec<T>, x: T) -> T {
    let EqualVarSpec { nu_v, nu_w, rho, t } = *spec;
    let two: T = lit(2.0);
    let r = spec.r(x);
    let q = spec.one_m_rho2();
    let u = nu_v * (T::one() - rho * x) + nu_w * (x - rho);
    let dev = nu_w - nu_v * x;
    let gauss = (-(dev * dev) / (two * t * r)).exp() / (two * T::PI() * t * r).sqrt();
    let first = gauss * (u / r) * erf(u / (two * t * q * r).sqrt());
    let c = (nu_v * nu_v - two * nu_v * nu_w * rho + nu_w * nu_w) / (two * t * q);
    let second = q.sqrt() / (T::PI() * r) * (-c).exp();
    first + second
}

/// Equal-variance density evaluated through the normalized parametrization
/// `h(x, t; ν_v, ν_w, ρ) = h(x, t/ν_v²; 1, ν_w/ν_v, ρ)`.
pub fn density_scaled<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<T> {
    Ok(density_equal_var(&normalized(spec)?, x))
}

/// The spec with `ν_v = 1`, `ν_w → ν_w/ν_v` and `t → t/ν_v²`.
pub fn normalized<T: Real>(spec: &EqualVarSpec<T>) -> Result<EqualVarSpec<T>> {
    spec.require_nonzero_nu_v()?;
    if spec.nu_v == T::one() {
        return Ok(*spec);
    }
    EqualVarSpec::new(
        T::one(),
        spec.nu_w / spec.nu_v,
        spec.rho,
        spec.t / (spec.nu_v * spec.nu_v),
    )
}

/// `lim_{t→∞} h(x, t) = √(1−ρ²) / (π (x² − 2xρ + 1))`.
pub fn density_limit_t_inf<T: Real>(rho: T, x: T) -> Result<T> {
    if !(rho.abs() < T::one()) {
        return Err(Error::invalid(format!("|rho| must be < 1, got {rho}")));
    }
    let r = x * x - lit::<T>(2.0) * rho * x + T::one();
    Ok((T::one() - rho * rho).sqrt() / (T::PI() * r))
}

/// Coefficients multiplying `L_0 … L_4` in the `t`, `x` and `xx` derivatives
/// of the equal-variance density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCoefficients<T> {
    pub a_t: T,
    pub b_t: T,
    pub c_t: T,
    pub a_x: T,
    pub b_x: T,
    pub e_xx: T,
    pub f_xx: T,
    pub a_xx: T,
}

impl<T: Real> DerivativeCoefficients<T> {
    pub fn new(spec: &EqualVarSpec<T>, x: T) -> Self {
        let EqualVarSpec { nu_v, nu_w, rho, t } = *spec;
        let two: T = lit(2.0);
        let q = spec.one_m_rho2();
        let q32 = q * q.sqrt();
        let q52 = q32 * q;
        let t2 = t * t;
        let t3 = t2 * t;
        let xr = x - rho;
        let wv = nu_w - nu_v * rho;
        Self {
            a_t: spec.r(x) / (two * t3 * q32),
            b_t: -(nu_v + nu_w * x - (nu_w + nu_v * x) * rho) / (t3 * q32),
            c_t: (nu_v * nu_v + nu_w * nu_w - two * nu_v * nu_w * rho - two * t * q)
                / (two * t3 * q32),
            a_x: -xr / (t2 * q32),
            b_x: wv / (t2 * q32),
            e_xx: xr * xr / (t3 * q52),
            f_xx: -two * xr * wv / (t3 * q52),
            a_xx: (wv * wv - t * q) / (t3 * q52),
        }
    }
}

/// `(h_t, h_x, h_xx)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives<T> {
    pub h_t: T,
    pub h_x: T,
    pub h_xx: T,
}

/// The moments `e^{-c}L_0, e^{-c}L_1, e^{-c}L_2` divided by `2π`, computed in
/// scaled form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledMoments<T> {
    pub l0: T,
    pub l1: T,
    pub l2: T,
    pub abc: AbcCoefficients<T>,
}

pub(crate) fn scaled_moments<T: Real>(spec: &EqualVarSpec<T>, x: T) -> ScaledMoments<T> {
    let abc = abc_equal_var(spec, x);
    let dev = spec.nu_w - spec.nu_v * x;
    let peak = (-(dev * dev) / (lit::<T>(2.0) * spec.t * spec.r(x))).exp();
    let f = peak / (lit::<T>(2.0) * T::PI());
    let l = |n| {
        let p = MomentParams::new(abc.a, abc.b, n).expect("a > 0 for |rho| < 1");
        moment_l_scaled(&p) * f
    };
    ScaledMoments {
        l0: l(0),
        l1: l(1),
        l2: l(2),
        abc,
    }
}

/// Analytic `h_t`, `h_x`, `h_xx` of the equal-variance density through the
/// coefficient form, with `L₃` and `L₄` eliminated through the three-term
/// moment relations. Loses roughly `1/t²` in relative accuracy; see
/// [`derivatives`] for the well-conditioned evaluation.
pub fn derivatives_lemma<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<Derivatives<T>> {
    spec.require_nonzero_nu_v()?;
    let m = scaled_moments(spec, x);
    let k = DerivativeCoefficients::new(spec, x);
    let w = moment_recurrence(m.abc.a, m.abc.b)?;
    let c_xx = k.a_xx + k.f_xx * w.w2 + k.e_xx * w.w4;
    let d_xx = k.f_xx * w.w1 + k.e_xx * w.w3;
    Ok(Derivatives {
        h_t: k.a_t * m.l2 + k.b_t * m.l1 + k.c_t * m.l0,
        h_x: k.a_x * m.l2 + k.b_x * m.l1,
        h_xx: c_xx * m.l2 + d_xx * m.l1,
    })
}

/// `J_k = ∫ |λ₀ + μ| μᵏ e^{−aμ²} dμ` for `k = 0..4`.
fn central_moments<T: Real>(a: T, lambda0: T) -> [T; 5] {
    let half: T = lit(0.5);
    let l = lambda0.abs();
    let g0 = (T::PI() / a).sqrt();
    let inv2a = half / a;
    let g = [g0, T::zero(), g0 * inv2a, T::zero(), lit::<T>(3.0) * g0 * inv2a * inv2a, T::zero()];
    // I_m = ∫_{−∞}^{−l} μᵐ e^{−aμ²} dμ
    let e = (-a * l * l).exp();
    let mut i = [T::zero(); 6];
    i[0] = half * g0 * erfc(a.sqrt() * l);
    i[1] = -e * inv2a;
    let mut lp = T::one();
    for m in 2..6 {
        lp = lp * -l;
        i[m] = -lp * e * inv2a + from_usize::<T>(m - 1) * inv2a * i[m - 2];
    }
    let mut j = [T::zero(); 5];
    for k in 0..5 {
        let v = l * g[k] + g[k + 1] - lit::<T>(2.0) * (l * i[k] + i[k + 1]);
        j[k] = if lambda0 < T::zero() && k % 2 == 1 { -v } else { v };
    }
    j
}

/// Analytic `h_t`, `h_x`, `h_xx` of the equal-variance density.
///
/// Writes `h = ∫|λ| e^{E(λ)} dλ / (2π√d)` with `E = −aλ² + 2bλ − c`, and
/// expands each differentiated integrand in powers of `λ − b/a`. The
/// coefficients stay of the size of the result, so no `1/t³` terms cancel.
pub fn derivatives<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<Derivatives<T>> {
    spec.require_nonzero_nu_v()?;
    let EqualVarSpec { nu_v, nu_w, rho, t } = *spec;
    let two: T = lit(2.0);
    let q = spec.one_m_rho2();
    let r = spec.r(x);
    let qt = q * t;
    let a = r / (two * qt);
    let lambda0 = (nu_v - rho * nu_w + (nu_w - rho * nu_v) * x) / r;
    let dev = nu_w - nu_v * x;
    let e_peak = -(dev * dev) / (two * t * r);
    let a_x = (x - rho) / qt;
    let b_x = (nu_w - rho * nu_v) / (two * qt);
    let a_xx = T::one() / qt;
    // E_x = e0 + e1 μ + e2 μ²; e0 is the x-derivative of the peak value.
    let e0 = nu_v * dev / (t * r) + dev * dev * (x - rho) / (t * r * r);
    let e1 = two * (b_x - a_x * lambda0);
    let e2 = -a_x;
    let j = central_moments(a, lambda0);
    let pref = e_peak.exp() / (two * T::PI() * t * q.sqrt());
    let h = pref * j[0];
    let h_x = pref * (e0 * j[0] + e1 * j[1] + e2 * j[2]);
    // E_x² + E_xx with E_xx = −a_xx (λ₀ + μ)²
    let k = [
        e0 * e0 - a_xx * lambda0 * lambda0,
        two * e0 * e1 - two * a_xx * lambda0,
        e1 * e1 + two * e0 * e2 - a_xx,
        two * e1 * e2,
        e2 * e2,
    ];
    let h_xx = pref * k.iter().zip(&j).fold(T::zero(), |acc, (c, m)| acc + *c * *m);
    // E is homogeneous of degree −1 in t and √d of degree 1.
    let h_t = -(h * (T::one() + e_peak) - pref * a * j[2]) / t;
    Ok(Derivatives { h_t, h_x, h_xx })
}

/// `h_t` alone.
pub fn time_derivative<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<T> {
    Ok(derivatives(spec, x)?.h_t)
}
