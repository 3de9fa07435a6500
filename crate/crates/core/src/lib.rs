//! Kernel density estimation for spectra of matrix-pencil signal models,
//! built on the exact density of a ratio of correlated Gaussians.
//!
//! The numerical core (`specfun`, `ratio`, `pde`, `qz`, `pencil`, `kde`) is
//! generic over [`Real`]; the aliases below fix it to `f64`.

// NaN must fail range checks, so negated comparisons are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kde;
pub mod optim;
pub mod pde;
pub mod pencil;
pub mod quad;
pub mod qz;
pub mod ratio;
pub mod scalar;
pub mod signal;
pub mod specfun;

pub use error::{Error, Result};
pub use scalar::Real;

pub type EqualVarSpec = ratio::EqualVarSpec<f64>;
pub type GeneralGaussianSpec = ratio::GeneralGaussianSpec<f64>;
pub type Derivatives = ratio::Derivatives<f64>;
pub type PdeCoefficients = pde::PdeCoefficients<f64>;
pub type HankelPencil = pencil::HankelPencil<f64>;
pub type Matrix = qz::Matrix<f64>;
pub type SignalModel = signal::SignalModel<f64>;
pub type EigenSample = kde::EigenSample<f64>;
pub type DensityGrid = kde::DensityGrid<f64>;
pub type Histogram = kde::Histogram<f64>;
pub type FitResult = kde::FitResult<f64>;
pub type Window = kde::Window<f64>;
pub type Mode = kde::Mode<f64>;
