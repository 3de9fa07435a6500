//! Hankel pencils of multiexponential data and their generalized eigenvalues.
//!
//! For `d_k = Σ f_j ζ_j^k` (0-based `k`), the pencil `(U₁, U₀)` with
//! `U₀[i][j] = d[i+j]` and `U₁[i][j] = d[i+j+1]` has generalized eigenvalues
//! `ζ_j`. With noise, the diagonal pairs `(S_kk, T_kk)` of the generalized
//! Schur form are the random quantities whose ratios the estimators pool.

use crate::error::{Error, Result};
use crate::qz::{generalized_schur, GeneralizedSchur, Matrix, QzOptions};
use crate::scalar::{lit, Real};

/// The pair `(U₁, U₀)` of `p × p` Hankel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPencil<T> {
    pub u0: Matrix<T>,
    pub u1: Matrix<T>,
    pub p: usize,
}

impl<T: Real> HankelPencil<T> {
    /// Whether both matrices are exactly Hankel and shifted by one sample.
    pub fn is_hankel(&self) -> bool {
        let p = self.p;
        (0..p).all(|i| {
            (0..p).all(|j| {
                let k = i + j;
                let (r, c) = if k < p { (0, k) } else { (k - p + 1, p - 1) };
                self.u0[(i, j)] == self.u0[(r, c)]
                    && self.u1[(i, j)] == self.u1[(r, c)]
                    && (j + 1 >= p || self.u1[(i, j)] == self.u0[(i, j + 1)])
            })
        })
    }
}

/// Builds the pencil from `n = 2p` samples.
pub fn build_pencil<T: Real>(d: &[T]) -> Result<HankelPencil<T>> {
    let n = d.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "pencil needs an even number of samples >= 2, got {n}"
        )));
    }
    let p = n / 2;
    Ok(HankelPencil {
        u0: Matrix::from_fn(p, p, |i, j| d[i + j]),
        u1: Matrix::from_fn(p, p, |i, j| d[i + j + 1]),
        p,
    })
}

/// Diagonal pairs `(S_kk, T_kk)` of the generalized Schur form of `(U₁, U₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurPairs<T> {
    pub pairs: Vec<(T, T)>,
    /// `true` for 1×1 diagonal blocks.
    pub real_mask: Vec<bool>,
    /// `max(‖QᵀQ − I‖, ‖ZᵀZ − I‖)`; `NaN` when factors were not accumulated.
    pub q_orth_residual: T,
    /// `(‖QSZᵀ − U₁‖ + ‖QTZᵀ − U₀‖) / (‖U₁‖ + ‖U₀‖)`; `NaN` likewise.
    pub structure_residual: T,
    /// `‖T‖_F`, the scale for the infinite-eigenvalue test.
    pub t_norm: T,
}

impl<T: Real> SchurPairs<T> {
    fn from_schur(g: &GeneralizedSchur<T>, pencil: &HankelPencil<T>) -> Self {
        let n = pencil.p;
        Self {
            pairs: (0..n).map(|k| (g.s[(k, k)], g.t[(k, k)])).collect(),
            real_mask: g.block_size.iter().map(|&b| b == 1).collect(),
            q_orth_residual: g.orthogonality_residual(),
            structure_residual: g.reconstruction_residual(&pencil.u1, &pencil.u0),
            t_norm: g.t.frobenius(),
        }
    }
}

/// Generalized Schur decomposition of the pencil with accumulated factors and
/// residual diagnostics.
pub fn qz<T: Real>(pencil: &HankelPencil<T>) -> Result<SchurPairs<T>> {
    qz_with(pencil, QzOptions::default())
}

pub fn qz_with<T: Real>(pencil: &HankelPencil<T>, opts: QzOptions) -> Result<SchurPairs<T>> {
    let g = generalized_schur(&pencil.u1, &pencil.u0, opts)?;
    Ok(SchurPairs::from_schur(&g, pencil))
}

/// A real diagonal pair and its ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealPair<T> {
    pub s: T,
    pub t: T,
    pub ratio: T,
}

/// The usable real pairs plus the discard counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPairs<T> {
    pub pairs: Vec<RealPair<T>>,
    pub complex_discarded: usize,
    pub infinite_discarded: usize,
}

/// Relative threshold on `|T_kk| / ‖T‖` below which an eigenvalue is infinite.
pub const INFINITE_EIGENVALUE_TOL: f64 = 1e-14;

/// Keeps 1×1 blocks with `|t| ≥ 1e-14 ‖T‖`.
pub fn real_pairs<T: Real>(sp: &SchurPairs<T>) -> RealPairs<T> {
    let tol = (lit::<T>(INFINITE_EIGENVALUE_TOL) * sp.t_norm).max(T::min_positive_value());
    let mut out = RealPairs {
        pairs: Vec::with_capacity(sp.pairs.len()),
        complex_discarded: 0,
        infinite_discarded: 0,
    };
    for (&(s, t), &real) in sp.pairs.iter().zip(&sp.real_mask) {
        if !real {
            out.complex_discarded += 1;
        } else if t.abs() < tol {
            out.infinite_discarded += 1;
        } else {
            out.pairs.push(RealPair { s, t, ratio: s / t });
        }
    }
    out
}

/// Solves `V f = s[..p]` with `V[k][j] = ζ_jᵏ`, `k = 0..p−1`.
pub fn vandermonde_solve<T: Real>(zeta: &[T], s: &[T]) -> Result<Vec<T>> {
    let p = zeta.len();
    if p == 0 {
        return Err(Error::invalid("no nodes"));
    }
    if s.len() < p {
        return Err(Error::invalid(format!(
            "need at least {p} samples, got {}",
            s.len()
        )));
    }
    for i in 0..p {
        for j in 0..i {
            if (zeta[i] - zeta[j]).abs() < lit(1e-12) {
                return Err(Error::Singular(format!(
                    "nodes {i} and {j} coincide ({})",
                    zeta[i]
                )));
            }
        }
    }
    let mut m: Vec<Vec<T>> = (0..p)
        .map(|k| {
            let mut row: Vec<T> = zeta.iter().map(|&z| z.powi(k as i32)).collect();
            row.push(s[k]);
            row
        })
        .collect();
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).expect("finite"))
            .expect("non-empty range");
        if m[piv][col] == T::zero() {
            return Err(Error::Singular("Vandermonde matrix is singular".into()));
        }
        m.swap(col, piv);
        let pivot = m[col].clone();
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / pivot[col];
            for (x, &v) in row.iter_mut().zip(&pivot).skip(col) {
                *x = *x - f * v;
            }
        }
    }
    let mut f = vec![T::zero(); p];
    for r in (0..p).rev() {
        let tail = (r + 1..p).fold(T::zero(), |acc, c| acc + m[r][c] * f[c]);
        f[r] = (m[r][p] - tail) / m[r][r];
    }
    Ok(f)
}

/// `σ² / (∏|f_i| ∏_{i<j} (ζ_i − ζ_j)⁶)`; `+∞` for coincident nodes.
pub fn error_scale<T: Real>(f: &[T], zeta: &[T], sigma: T) -> Result<T> {
    if f.len() != zeta.len() || f.is_empty() {
        return Err(Error::invalid("f and zeta must be non-empty and equally long"));
    }
    if f.iter().any(|v| *v == T::zero()) {
        return Err(Error::invalid("amplitudes must be nonzero"));
    }
    let mut den = f.iter().fold(T::one(), |acc, v| acc * v.abs());
    for i in 0..zeta.len() {
        for j in i + 1..zeta.len() {
            den = den * (zeta[i] - zeta[j]).powi(6);
        }
    }
    if den == T::zero() {
        return Ok(T::infinity());
    }
    Ok(sigma * sigma / den)
}

/// Damping factors and amplitudes of `s_k = Σ f_j ζ_j^{k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit<T> {
    pub zeta: Vec<T>,
    pub f: Vec<T>,
}

impl<T: Real> ExponentialFit<T> {
    /// Recovers the model from noiseless data through the pencil eigenvalues
    /// and the Vandermonde solve. `zeta` comes back in decreasing order.
    pub fn from_data(d: &[T]) -> Result<Self> {
        let pencil = build_pencil(d)?;
        let rp = real_pairs(&qz(&pencil)?);
        if rp.pairs.len() != pencil.p {
            return Err(Error::Degenerate(format!(
                "{} of {} eigenvalues are not real and finite",
                pencil.p - rp.pairs.len(),
                pencil.p
            )));
        }
        let mut zeta: Vec<T> = rp.pairs.iter().map(|p| p.ratio).collect();
        zeta.sort_by(|a, b| b.partial_cmp(a).expect("finite ratios"));
        let f = vandermonde_solve(&zeta, d)?;
        Ok(Self { zeta, f })
    }

    /// `s_k` for `k = 1..=n`.
    pub fn reconstruct(&self, n: usize) -> Vec<T> {
        (0..n)
            .map(|k| {
                self.zeta
                    .iter()
                    .zip(&self.f)
                    .fold(T::zero(), |acc, (&z, &f)| acc + f * z.powi(k as i32))
            })
            .collect()
    }

    /// Decay rates `α_j = −ln ζ_j`.
    pub fn rates(&self) -> Vec<T> {
        self.zeta.iter().map(|z| -z.ln()).collect()
    }
}
