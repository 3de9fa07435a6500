//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the special functions, densities, PDE coefficients and
/// the QZ decomposition are written against.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline(always)]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in target float")
}

/// `usize` to `T`.
#[inline(always)]
pub fn from_usize<T: Real>(v: usize) -> T {
    T::from_usize(v).expect("usize representable in target float")
}
