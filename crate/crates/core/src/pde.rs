//! The diffusion equation satisfied by the equal-variance ratio density.
//!
//! For `ν_v ≠ 0` and `|ρ| < 1`, `h(x, t)` solves
//! `h_t = ∂ₓ[D hₓ] + C hₓ + S h` with
//!
//! * `D = P₃ / (Q₁ + tQ₂)`,
//! * `C = Gₓ − ∂ₓD` where `Gₓ = (P₁ + tP₂) / (t(Q₁ + tQ₂))`,
//! * `S = (ν_v² + ν_w² − 2ρν_vν_w) / (2t²(1−ρ²)) − 1/t`.
//!
//! `P₁…Q₂` are polynomials in `x` built once per spec by [`PdePolynomials`].
//! `D` has poles at the real roots of the cubic `Q₁ + tQ₂`; consumers should
//! stay outside a small tube around [`cubic_real_roots`].

use crate::error::{Error, Result};
use crate::ratio::{
    density_equal_var, derivatives, DerivativeCoefficients, Derivatives, EqualVarSpec,
};
use crate::scalar::{from_usize, lit, Real};
use crate::specfun::moment_recurrence;

/// Default relative threshold below which a denominator counts as zero.
pub const DEFAULT_EPS_DEN: f64 = 1e-12;

/// Dense polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coef: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(mut coef: Vec<T>) -> Self {
        if coef.is_empty() {
            coef.push(T::zero());
        }
        Self { coef }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `c₀ + c₁x`.
    pub fn linear(c0: T, c1: T) -> Self {
        Self::new(vec![c0, c1])
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coef
    }

    pub fn eval(&self, x: T) -> T {
        self.coef.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coef.len() <= 1 {
            return Self::constant(T::zero());
        }
        Self::new(
            self.coef
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * from_usize(i))
                .collect(),
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coef.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coef.len().max(other.coef.len());
        let get = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero);
        Self::new((0..n).map(|i| get(&self.coef, i) + get(&other.coef, i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![T::zero(); self.coef.len() + other.coef.len() - 1];
        for (i, &a) in self.coef.iter().enumerate() {
            for (j, &b) in other.coef.iter().enumerate() {
                out[i + j] = out[i + j] + a * b;
            }
        }
        Self::new(out)
    }

    /// Largest `k` with `|c_k| > tol · max|c|`, or `None` for the zero
    /// polynomial.
    pub fn effective_degree(&self, tol: T) -> Option<usize> {
        let m = self.coef.iter().fold(T::zero(), |acc, c| acc.max(c.abs()));
        if m == T::zero() {
            return None;
        }
        self.coef.iter().rposition(|c| c.abs() > tol * m)
    }
}

/// Values of the five polynomials at one `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialValues<T> {
    pub p1: T,
    pub p2: T,
    pub p3: T,
    pub q1: T,
    pub q2: T,
}

/// `P₁, P₂, P₃, Q₁, Q₂` as polynomials in `x` for a fixed `(ν_v, ν_w, ρ)`.
#[derive(Debug, Clone)]
pub struct PdePolynomials<T> {
    pub p1: Poly<T>,
    pub p2: Poly<T>,
    pub p3: Poly<T>,
    pub q1: Poly<T>,
    pub q2: Poly<T>,
}

impl<T: Real> PdePolynomials<T> {
    pub fn new(spec: &EqualVarSpec<T>) -> Self {
        let EqualVarSpec { nu_v, nu_w, rho, .. } = *spec;
        let c = Poly::constant;
        let n = |v: f64| lit::<T>(v);
        let x = Poly::linear(T::zero(), T::one());
        let x2 = x.mul(&x);
        let x3 = x2.mul(&x);
        let rho2 = rho * rho;
        let r = Poly::new(vec![T::one(), n(-2.0) * rho, T::one()]);
        // ν_w − ν_v x
        let dev = Poly::linear(nu_w, -nu_v);
        let dev2 = dev.mul(&dev);

        let p1_bracket = Poly::linear(nu_v - nu_w * rho, nu_w - nu_v * rho);
        let p1 = dev2.mul(&p1_bracket).scale(n(2.0) * (rho2 - T::one()));

        let p2_w = Poly::linear(rho, -T::one())
            .mul(&Poly::new(vec![n(11.0) * rho2 - n(8.0), n(-6.0) * rho, n(3.0)]))
            .scale(nu_w);
        let p2_v = Poly::new(vec![
            n(2.0) - n(5.0) * rho2,
            n(10.0) * rho - rho2 * rho,
            n(-9.0),
            n(3.0) * rho,
        ])
        .scale(nu_v);
        let p2 = r.mul(&p2_w.add(&p2_v));

        let p3_w = Poly::new(vec![T::one() - n(2.0) * rho2, n(2.0) * rho, -T::one()]).scale(nu_w);
        let p3_v = Poly::new(vec![rho, n(-2.0), rho]).scale(nu_v);
        let p3 = r.mul(&r).mul(&p3_w.add(&p3_v));

        let q1 = dev2.scale(n(2.0) * (T::one() - rho2) * (nu_w - nu_v * rho));

        let q2_w = c(T::one() + n(3.0) * rho2)
            .add(&x.scale(n(-8.0) * rho))
            .add(&x2.scale(n(4.0)))
            .scale(nu_w);
        let q2_v = c(rho)
            .add(&x.scale(rho2))
            .add(&x2.scale(n(-5.0) * rho))
            .add(&x3.scale(n(3.0)))
            .scale(nu_v);
        let q2 = q2_w.sub(&q2_v).scale(n(2.0) * (rho2 - T::one()));

        Self { p1, p2, p3, q1, q2 }
    }

    pub fn eval(&self, x: T) -> PolynomialValues<T> {
        PolynomialValues {
            p1: self.p1.eval(x),
            p2: self.p2.eval(x),
            p3: self.p3.eval(x),
            q1: self.q1.eval(x),
            q2: self.q2.eval(x),
        }
    }

    /// `Q₁ + tQ₂` as a polynomial in `x`.
    pub fn denominator(&self, t: T) -> Poly<T> {
        self.q1.add(&self.q2.scale(t))
    }
}

/// The five polynomial values at `x`, evaluated in their product forms.
pub fn polynomials<T: Real>(spec: &EqualVarSpec<T>, x: T) -> PolynomialValues<T> {
    factored(spec, x).0
}

/// Values plus `P₃'`, `Q₁'`, `Q₂'`. The product forms keep the double root of
/// `Q₁` at `x = ν_w/ν_v` exact, which the expanded coefficients do not.
fn factored<T: Real>(spec: &EqualVarSpec<T>, x: T) -> (PolynomialValues<T>, T, T, T) {
    let EqualVarSpec { nu_v, nu_w, rho, .. } = *spec;
    let n = |v: f64| lit::<T>(v);
    let rho2 = rho * rho;
    let r = spec.r(x);
    let dr = n(2.0) * (x - rho);
    let dev = nu_w - nu_v * x;
    let x2 = x * x;
    let p1 = n(2.0) * dev * dev * (nu_v + nu_w * x - (nu_w + nu_v * x) * rho) * (rho2 - T::one());
    let p2 = r
        * (nu_w * (rho - x) * (n(3.0) * x2 - n(6.0) * x * rho + n(11.0) * rho2 - n(8.0))
            + nu_v
                * (n(2.0) - n(9.0) * x2 + n(10.0) * x * rho + n(3.0) * x2 * x * rho
                    - n(5.0) * rho2
                    - x * rho2 * rho));
    let w = nu_w * (T::one() - x2 + n(2.0) * x * rho - n(2.0) * rho2)
        + nu_v * (rho + x * (n(-2.0) + x * rho));
    let dw = nu_w * n(2.0) * (rho - x) + nu_v * n(2.0) * (rho * x - T::one());
    let p3 = r * r * w;
    let dp3 = r * (n(2.0) * dr * w + r * dw);
    let k1 = n(2.0) * (T::one() - rho2) * (nu_w - nu_v * rho);
    let q1 = k1 * dev * dev;
    let dq1 = n(-2.0) * k1 * nu_v * dev;
    let k2 = n(2.0) * (rho2 - T::one());
    let q2 = k2
        * (nu_w * (T::one() + n(4.0) * x2 - n(8.0) * x * rho + n(3.0) * rho2)
            - nu_v * (rho + x * (n(3.0) * x2 - n(5.0) * x * rho + rho2)));
    let dq2 = k2
        * (nu_w * n(8.0) * (x - rho)
            - nu_v * (n(9.0) * x2 - n(10.0) * x * rho + rho2));
    (PolynomialValues { p1, p2, p3, q1, q2 }, dp3, dq1, dq2)
}

/// Coefficients of `hₓ` and `hₓₓ` when `h_t` is written as
/// `S h + Gₓ hₓ + Gₓₓ hₓₓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCoefficients<T> {
    pub g_x: T,
    pub g_xx: T,
}

/// `Gₓ`, `Gₓₓ` from the derivative coefficients and the moment recurrence,
/// independently of the polynomial form.
pub fn g_coefficients<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<GCoefficients<T>> {
    g_coefficients_with(spec, x, lit(DEFAULT_EPS_DEN))
}

pub fn g_coefficients_with<T: Real>(
    spec: &EqualVarSpec<T>,
    x: T,
    eps_den: T,
) -> Result<GCoefficients<T>> {
    spec.require_nonzero_nu_v()?;
    let k = DerivativeCoefficients::new(spec, x);
    let abc = crate::ratio::abc_equal_var(spec, x);
    let w = moment_recurrence(abc.a, abc.b)?;
    let c_xx = k.a_xx + k.f_xx * w.w2 + k.e_xx * w.w4;
    let d_xx = k.f_xx * w.w1 + k.e_xx * w.w3;
    let (u, v) = (k.a_x * d_xx, k.b_x * c_xx);
    let den = u - v;
    if !(den.abs() > eps_den * u.abs().max(v.abs())) {
        return Err(Error::Singular(format!(
            "G-coefficient denominator vanishes at x = {x}, t = {}",
            spec.t
        )));
    }
    Ok(GCoefficients {
        g_x: (k.a_t * d_xx - k.b_t * c_xx) / den,
        g_xx: (k.a_x * k.b_t - k.a_t * k.b_x) / den,
    })
}

/// `(ν_v² + ν_w² − 2ρν_vν_w) / (2t²(1−ρ²)) − 1/t`.
pub fn source_coefficient<T: Real>(spec: &EqualVarSpec<T>) -> T {
    let EqualVarSpec { nu_v, nu_w, rho, t } = *spec;
    let m = nu_v * nu_v + nu_w * nu_w - lit::<T>(2.0) * rho * nu_v * nu_w;
    m / (lit::<T>(2.0) * t * t * spec.one_m_rho2()) - T::one() / t
}

/// Diffusion, convection and source coefficients at `(x, t)`, plus `∂ₓD`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients<T> {
    pub x: T,
    pub t: T,
    pub d: T,
    pub c: T,
    pub s: T,
    pub d_x: T,
}

/// Evaluator for `D`, `C`, `S` at a fixed spec.
#[derive(Debug, Clone)]
pub struct CoefficientField<T> {
    spec: EqualVarSpec<T>,
    s: T,
    eps_den: T,
}

impl<T: Real> CoefficientField<T> {
    pub fn new(spec: &EqualVarSpec<T>) -> Result<Self> {
        Self::with_eps(spec, lit(DEFAULT_EPS_DEN))
    }

    pub fn with_eps(spec: &EqualVarSpec<T>, eps_den: T) -> Result<Self> {
        spec.require_nonzero_nu_v()?;
        Ok(Self {
            spec: *spec,
            s: source_coefficient(spec),
            eps_den,
        })
    }

    pub fn spec(&self) -> &EqualVarSpec<T> {
        &self.spec
    }

    pub fn at(&self, x: T) -> Result<PdeCoefficients<T>> {
        let t = self.spec.t;
        let (v, dp3, dq1, dq2) = factored(&self.spec, x);
        let (a, b) = (v.q1, t * v.q2);
        let q = a + b;
        if !(q.abs() > self.eps_den * a.abs().max(b.abs())) || q == T::zero() {
            return Err(Error::Singular(format!(
                "Q1 + tQ2 vanishes at x = {x}, t = {t}"
            )));
        }
        let d = v.p3 / q;
        let d_x = (dp3 - d * (dq1 + t * dq2)) / q;
        let g_x = (v.p1 + t * v.p2) / (t * q);
        Ok(PdeCoefficients {
            x,
            t,
            d,
            c: g_x - d_x,
            s: self.s,
            d_x,
        })
    }
}

/// `D`, `C`, `S` at one point.
pub fn pde_coefficients<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<PdeCoefficients<T>> {
    CoefficientField::new(spec)?.at(x)
}

/// `h_t` assembled as `S h + Gₓ hₓ + Gₓₓ hₓₓ` from the analytic derivatives.
pub fn time_derivative_from_g<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<T> {
    let g = g_coefficients(spec, x)?;
    let d = derivatives(spec, x)?;
    let h = density_equal_var(spec, x);
    Ok(source_coefficient(spec) * h + g.g_x * d.h_x + g.g_xx * d.h_xx)
}

/// Everything the residual check reports at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPoint<T> {
    pub x: T,
    pub h: T,
    pub h_t: T,
    pub coefficients: PdeCoefficients<T>,
    pub residual: T,
}

impl<T: Real> ResidualPoint<T> {
    /// `|residual| / max(|h_t|, tiny)`.
    pub fn relative(&self) -> T {
        self.residual.abs() / self.h_t.abs().max(T::min_positive_value())
    }
}

fn residual_from<T: Real>(
    field: &CoefficientField<T>,
    x: T,
) -> Result<ResidualPoint<T>> {
    let spec = field.spec();
    let k = field.at(x)?;
    let Derivatives { h_t, h_x, h_xx } = derivatives(spec, x)?;
    let h = density_equal_var(spec, x);
    let rhs = k.d * h_xx + k.d_x * h_x + k.c * h_x + k.s * h;
    Ok(ResidualPoint {
        x,
        h,
        h_t,
        coefficients: k,
        residual: h_t - rhs,
    })
}

/// `h_t − (∂ₓ[D hₓ] + C hₓ + S h)` at `x`.
pub fn residual<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<T> {
    Ok(residual_point(spec, x)?.residual)
}

pub fn residual_point<T: Real>(spec: &EqualVarSpec<T>, x: T) -> Result<ResidualPoint<T>> {
    residual_from(&CoefficientField::new(spec)?, x)
}

/// Residual points on a uniform grid, skipping abscissae within `tube` of a
/// real root of `Q₁ + tQ₂`.
pub fn residual_grid<T: Real>(
    spec: &EqualVarSpec<T>,
    lo: T,
    hi: T,
    points: usize,
    tube: T,
) -> Result<Vec<ResidualPoint<T>>> {
    if points < 2 || !(lo < hi) {
        return Err(Error::invalid("residual grid needs lo < hi and >= 2 points"));
    }
    let field = CoefficientField::new(spec)?;
    let roots = cubic_real_roots(spec, spec.t);
    let step = (hi - lo) / from_usize(points - 1);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let x = lo + step * from_usize(i);
        if roots.iter().any(|&r| (x - r).abs() < tube) {
            continue;
        }
        out.push(residual_from(&field, x)?);
    }
    Ok(out)
}

/// Real roots of `Q₁(x) + tQ₂(x)`, sorted ascending. Falls back to quadratic
/// or linear formulas when the leading coefficients vanish.
pub fn cubic_real_roots<T: Real>(spec: &EqualVarSpec<T>, t: T) -> Vec<T> {
    let den = PdePolynomials::new(spec).denominator(t);
    let mut roots = poly_real_roots(&den);
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    roots
}

fn poly_real_roots<T: Real>(p: &Poly<T>) -> Vec<T> {
    let tol = T::epsilon() * lit(64.0);
    let c = p.coefficients();
    let roots = match p.effective_degree(tol) {
        None | Some(0) => vec![],
        Some(1) => vec![-c[0] / c[1]],
        Some(2) => quadratic_roots(c[2], c[1], c[0]),
        Some(_) => cubic_roots(c[3], c[2], c[1], c[0]),
    };
    let dp = p.derivative();
    roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..8 {
                let (f, df) = (p.eval(x), dp.eval(x));
                if df == T::zero() {
                    break;
                }
                let step = f / df;
                if !step.is_finite() {
                    break;
                }
                x = x - step;
                if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
                    break;
                }
            }
            x
        })
        .collect()
}

fn quadratic_roots<T: Real>(a: T, b: T, c: T) -> Vec<T> {
    let disc = b * b - lit::<T>(4.0) * a * c;
    if disc < T::zero() {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq) * lit(0.5);
    if q == T::zero() {
        return vec![T::zero(), T::zero()];
    }
    vec![q / a, c / q]
}

fn cubic_roots<T: Real>(a3: T, a2: T, a1: T, a0: T) -> Vec<T> {
    let (a, b, c) = (a2 / a3, a1 / a3, a0 / a3);
    let third: T = lit(1.0 / 3.0);
    let q = (a * a - lit::<T>(3.0) * b) / lit(9.0);
    let r = (lit::<T>(2.0) * a * a * a - lit::<T>(9.0) * a * b + lit::<T>(27.0) * c) / lit(54.0);
    let q3 = q * q * q;
    if r * r < q3 {
        let theta = (r / q3.sqrt()).acos();
        let m = lit::<T>(-2.0) * q.sqrt();
        let two_pi_3 = lit::<T>(2.0) * T::PI() * third;
        (0..3)
            .map(|k| m * (theta * third + two_pi_3 * from_usize(k)).cos() - a * third)
            .collect()
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let small = if big == T::zero() { T::zero() } else { q / big };
        vec![big + small - a * third]
    }
}

/// Discriminant of `a₃x³ + a₂x² + a₁x + a₀`: positive for three distinct real
/// roots, negative for one.
pub fn cubic_discriminant<T: Real>(a3: T, a2: T, a1: T, a0: T) -> T {
    let n = |v: f64| lit::<T>(v);
    n(18.0) * a3 * a2 * a1 * a0 - n(4.0) * a2 * a2 * a2 * a0 + a2 * a2 * a1 * a1
        - n(4.0) * a3 * a1 * a1 * a1
        - n(27.0) * a3 * a3 * a0 * a0
}

/// The operator with its coefficients frozen at `t₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec<T> {
    pub params: EqualVarSpec<T>,
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(nu_v: T, nu_w: T, rho: T, t0: T) -> Result<Self> {
        let params = EqualVarSpec::new(nu_v, nu_w, rho, t0)?;
        params.require_nonzero_nu_v()?;
        Ok(Self { params })
    }

    pub fn t0(&self) -> T {
        self.params.t
    }

    /// `∂ₓ[D₀ hₓ] + C₀ hₓ + S₀ h` applied to `h(·, t₀)` at `x`.
    pub fn apply(&self, x: T) -> Result<T> {
        let k = pde_coefficients(&self.params, x)?;
        let d = derivatives(&self.params, x)?;
        let h = density_equal_var(&self.params, x);
        Ok(k.d * d.h_xx + (k.d_x + k.c) * d.h_x + k.s * h)
    }
}

/// Outcome of probing the sign of `D` on a window over a range of times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport<T> {
    pub is_positive: bool,
    pub violating_x: Option<T>,
    pub violating_t: Option<T>,
}

/// Probe times: 25 log-spaced values from `1e-6` to `1e2`, plus `t₀`.
pub fn probe_times<T: Real>(t0: T) -> Vec<T> {
    let mut ts: Vec<T> = (0..25)
        .map(|i| lit::<T>(10.0).powf(lit::<T>(-6.0) + lit::<T>(8.0) * from_usize::<T>(i) / lit(24.0)))
        .collect();
    ts.push(t0);
    ts
}

/// Samples `D(x, t)` on `n_probe` points across `window` for each of
/// [`probe_times`]. A pole or a non-positive value is a violation.
pub fn positivity_interval<T: Real>(
    op: &OperatorSpec<T>,
    window: (T, T),
    n_probe: usize,
) -> Result<PositivityReport<T>> {
    let (lo, hi) = window;
    if !(lo < hi) || n_probe < 2 {
        return Err(Error::invalid("positivity probe needs lo < hi and >= 2 points"));
    }
    let step = (hi - lo) / from_usize(n_probe - 1);
    for t in probe_times(op.t0()) {
        let field = CoefficientField::new(&op.params.at_time(t)?)?;
        for i in 0..n_probe {
            let x = lo + step * from_usize(i);
            let ok = matches!(field.at(x), Ok(k) if k.d > T::zero() && k.d.is_finite());
            if !ok {
                return Ok(PositivityReport {
                    is_positive: false,
                    violating_x: Some(x),
                    violating_t: Some(t),
                });
            }
        }
    }
    Ok(PositivityReport {
        is_positive: true,
        violating_x: None,
        violating_t: None,
    })
}
