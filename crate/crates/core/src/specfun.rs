//! Scalar special functions: the error function, Kummer's function at the
//! integer/half-integer parameters the ratio density needs, and the moment
//! integrals `L_n = ∫ |λ| λ^n exp(-aλ² + 2bλ) dλ`.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

// Rational approximations of W. J. Cody (CALERF), digits as published.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_9,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_4,
    1.872_952_849_923_467_3,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

/// Complementary error function for `y >= 0.46875`.
fn erfc_tail<T: Real>(y: T) -> T {
    if y >= lit(26.543) {
        return T::zero();
    }
    let r = if y <= lit(4.0) {
        let mut num = lit::<T>(ERF_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + lit(ERF_C[i])) * y;
            den = (den + lit(ERF_D[i])) * y;
        }
        (num + lit(ERF_C[7])) / (den + lit(ERF_D[7]))
    } else {
        let ysq = T::one() / (y * y);
        let mut num = lit::<T>(ERF_P[5]) * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + lit(ERF_P[i])) * ysq;
            den = (den + lit(ERF_Q[i])) * ysq;
        }
        let r = ysq * (num + lit(ERF_P[4])) / (den + lit(ERF_Q[4]));
        (T::FRAC_2_SQRT_PI() * lit(0.5) - r) / y
    };
    // exp(-y²) split to keep the rounding of y² out of the exponent.
    let ysq = (y * lit(16.0)).trunc() / lit(16.0);
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Error function, accurate to a few ulps in `f64`.
pub fn erf<T: Real>(x: T) -> T {
    let y = x.abs();
    if y <= lit(0.468_75) {
        let ysq = if y > lit(1.11e-16) { y * y } else { T::zero() };
        let mut num = lit::<T>(ERF_A[4]) * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + lit(ERF_A[i])) * ysq;
            den = (den + lit(ERF_B[i])) * ysq;
        }
        return x * (num + lit(ERF_A[3])) / (den + lit(ERF_B[3]));
    }
    let r = (lit::<T>(0.5) - erfc_tail(y)) + lit(0.5);
    if x < T::zero() {
        -r
    } else {
        r
    }
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc<T: Real>(x: T) -> T {
    let y = x.abs();
    if y <= lit(0.468_75) {
        return T::one() - erf(x);
    }
    let r = erfc_tail(y);
    if x < T::zero() {
        lit::<T>(2.0) - r
    } else {
        r
    }
}

/// Γ(m/2) for a positive integer `m`, from the closed forms at integers and
/// half-integers.
pub fn gamma_half_integer<T: Real>(twice_arg: u32) -> T {
    assert!(twice_arg > 0, "Γ is undefined at 0");
    if twice_arg.is_multiple_of(2) {
        // Γ(k) = (k-1)!
        (1..twice_arg / 2).fold(T::one(), |acc, j| acc * from_usize(j as usize))
    } else {
        // Γ(k + 1/2) = √π · (1/2)(3/2)…(k - 1/2)
        let k = (twice_arg - 1) / 2;
        (0..k).fold(T::PI().sqrt(), |acc, j| {
            acc * (from_usize::<T>(j as usize) + lit(0.5))
        })
    }
}

/// Lower parameter of the supported Kummer functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KummerLower {
    Half,
    ThreeHalves,
}

impl KummerLower {
    fn value<T: Real>(self) -> T {
        match self {
            KummerLower::Half => lit(0.5),
            KummerLower::ThreeHalves => lit(1.5),
        }
    }

    fn from_value<T: Real>(k: T) -> Option<Self> {
        if k == lit(0.5) {
            Some(KummerLower::Half)
        } else if k == lit(1.5) {
            Some(KummerLower::ThreeHalves)
        } else {
            None
        }
    }
}

/// Upper threshold of the power-series branch of [`hyp1f1_half`].
pub const HYP1F1_SERIES_MAX_Z: f64 = 30.0;

/// Parses the upper parameter into twice its value, rejecting anything that
/// is not a positive integer or half-integer.
fn twice_upper<T: Real>(h: T) -> Result<u32> {
    let h2 = h * lit(2.0);
    if !(h2 >= T::one()) || h2 != h2.round() || h2 > lit(1.0e6) {
        return Err(Error::invalid(format!(
            "1F1 upper parameter must be a positive integer or half-integer, got {h}"
        )));
    }
    Ok(h2.to_u32().expect("checked range"))
}

/// Kummer's function `₁F₁(h; k; z)` for `k ∈ {1/2, 3/2}`, integer or
/// half-integer `h > 0` and `z ≥ 0`.
///
/// Integer `h` uses the power series for `z ≤ 30` and, above that, the
/// closed form at `h = 1` in terms of `erf` followed by the forward
/// three-term recurrence in `h`. Half-integer `h ≥ k` reduces via Kummer's
/// transformation to `e^z` times a polynomial with positive coefficients.
pub fn hyp1f1_half<T: Real>(h: T, k: T, z: T) -> Result<T> {
    let (h2, lower) = check_kummer_args(h, k, z)?;
    Ok(hyp1f1_scaled_checked(h2, lower, z) * z.exp())
}

/// `e^{-z} ₁F₁(h; k; z)`; finite for every `z ≥ 0` where the unscaled value
/// would overflow.
pub fn hyp1f1_half_scaled<T: Real>(h: T, k: T, z: T) -> Result<T> {
    let (h2, lower) = check_kummer_args(h, k, z)?;
    Ok(hyp1f1_scaled_checked(h2, lower, z))
}

fn check_kummer_args<T: Real>(h: T, k: T, z: T) -> Result<(u32, KummerLower)> {
    let lower = KummerLower::from_value(k).ok_or_else(|| {
        Error::invalid(format!("1F1 lower parameter must be 1/2 or 3/2, got {k}"))
    })?;
    let h2 = twice_upper(h)?;
    if h2 % 2 == 1 && lower == KummerLower::ThreeHalves && h2 < 3 {
        return Err(Error::invalid("1F1(1/2; 3/2; z) is not supported"));
    }
    if !(z >= T::zero()) || !z.is_finite() {
        return Err(Error::invalid(format!("1F1 argument must be finite and >= 0, got {z}")));
    }
    Ok((h2, lower))
}

pub(crate) fn hyp1f1_scaled_checked<T: Real>(h2: u32, lower: KummerLower, z: T) -> T {
    if h2 % 2 == 1 {
        return kummer_polynomial(h2, lower, z);
    }
    let h = (h2 / 2) as usize;
    if z <= lit(HYP1F1_SERIES_MAX_Z) {
        kummer_series(from_usize(h), lower.value(), z) * (-z).exp()
    } else {
        kummer_recurrence(h, lower, z)
    }
}

fn kummer_series<T: Real>(h: T, k: T, z: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    let mut j = T::zero();
    let tol = lit::<T>(1e-16).max(T::epsilon() * lit(0.5));
    for _ in 0..10_000 {
        term = term * (h + j) / (k + j) * z / (j + T::one());
        sum = sum + term;
        j = j + T::one();
        if term <= tol * sum {
            break;
        }
    }
    sum
}

/// `e^{-z} ₁F₁(h; k; z)` for half-integer `h ≥ k`, via
/// `₁F₁(h; k; z) = e^z ₁F₁(k-h; k; -z)` with `k - h = -m`.
fn kummer_polynomial<T: Real>(h2: u32, lower: KummerLower, z: T) -> T {
    let k: T = lower.value();
    let k2 = match lower {
        KummerLower::Half => 1,
        KummerLower::ThreeHalves => 3,
    };
    let m = ((h2 - k2) / 2) as usize;
    let mut term = T::one();
    let mut sum = T::one();
    for j in 0..m {
        let jf: T = from_usize(j);
        term = term * (from_usize::<T>(m) - jf) / (k + jf) * z / (jf + T::one());
        sum = sum + term;
    }
    sum
}

/// Forward recurrence `M(a+1) = [(2a - k + z) M(a) + (k - a) M(a-1)] / a`
/// from `M(0) = 1` and the erf closed form of `M(1)`, all scaled by `e^{-z}`.
fn kummer_recurrence<T: Real>(h: usize, lower: KummerLower, z: T) -> T {
    let sz = z.sqrt();
    let m0 = (-z).exp();
    let m1 = match lower {
        KummerLower::Half => m0 + (T::PI() * z).sqrt() * erf(sz),
        KummerLower::ThreeHalves => T::PI().sqrt() * erf(sz) / (lit::<T>(2.0) * sz),
    };
    if h == 0 {
        return m0;
    }
    let k: T = lower.value();
    let (mut prev, mut cur) = (m0, m1);
    for a in 1..h {
        let af: T = from_usize(a);
        let next = ((lit::<T>(2.0) * af - k + z) * cur + (k - af) * prev) / af;
        prev = cur;
        cur = next;
    }
    cur
}

/// Parameters of the moment integral `L_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams<T> {
    a: T,
    b: T,
    n: u32,
}

impl<T: Real> MomentParams<T> {
    pub fn new(a: T, b: T, n: u32) -> Result<Self> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::invalid(format!("moment integral needs a > 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::invalid("moment integral needs finite b"));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// The Kummer argument `b²/a`.
    pub fn z(&self) -> T {
        self.b * self.b / self.a
    }
}

/// `L_n = ∫ |λ| λⁿ e^{-aλ² + 2bλ} dλ` in closed form.
pub fn moment_l<T: Real>(p: &MomentParams<T>) -> T {
    moment_l_scaled(p) * p.z().exp()
}

/// `e^{-b²/a} L_n`, which stays finite when `b²/a` is large.
pub fn moment_l_scaled<T: Real>(p: &MomentParams<T>) -> T {
    let (a, b, n) = (p.a, p.b, p.n);
    let z = p.z();
    if n % 2 == 0 {
        let h2 = n + 2;
        let f = hyp1f1_scaled_checked(h2, KummerLower::Half, z);
        a.powf(-from_usize::<T>(h2 as usize) * lit(0.5)) * gamma_half_integer::<T>(h2) * f
    } else {
        let h2 = n + 3;
        let f = hyp1f1_scaled_checked(h2, KummerLower::ThreeHalves, z);
        lit::<T>(2.0)
            * b
            * a.powf(-from_usize::<T>(h2 as usize) * lit(0.5))
            * gamma_half_integer::<T>(h2)
            * f
    }
}

/// Coefficients of `L₃ = W₁L₁ + W₂L₂` and `L₄ = W₃L₁ + W₄L₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRecurrence<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
    pub w4: T,
}

pub fn moment_recurrence<T: Real>(a: T, b: T) -> Result<MomentRecurrence<T>> {
    if !(a > T::zero()) {
        return Err(Error::invalid(format!("moment recurrence needs a > 0, got {a}")));
    }
    let a2 = a * a;
    Ok(MomentRecurrence {
        w1: lit::<T>(1.5) / a,
        w2: b / a,
        w3: lit::<T>(1.5) * b / a2,
        w4: (lit::<T>(2.0) * a + b * b) / a2,
    })
}
