//! Real generalized Schur decomposition `A = Q S Zᵀ`, `B = Q T Zᵀ`.
//!
//! Householder-free: every orthogonal update is a Givens rotation. The
//! reduction is QR of `B`, Hessenberg-triangular reduction, then implicit
//! double-shift sweeps with deflation. Zero diagonal entries of `T` are chased
//! to the bottom of the active block and split off as infinite eigenvalues.
//! Converged 2×2 blocks with real eigenvalues are split into 1×1 blocks; blocks
//! with a complex pair are kept and flagged.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch");
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.n_cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n_rows, self.n_cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    /// Rows `i`, `j` ← `[c s; −s c] [row_i; row_j]` over columns `cols`.
    fn rot_rows(&mut self, i: usize, j: usize, c: T, s: T, cols: std::ops::Range<usize>) {
        for col in cols {
            let (a, b) = (self[(i, col)], self[(j, col)]);
            self[(i, col)] = c * a + s * b;
            self[(j, col)] = c * b - s * a;
        }
    }

    /// Columns `i`, `j` ← `(c·col_i + s·col_j, −s·col_i + c·col_j)` over `rows`.
    fn rot_cols(&mut self, i: usize, j: usize, c: T, s: T, rows: std::ops::Range<usize>) {
        for row in rows {
            let (a, b) = (self[(row, i)], self[(row, j)]);
            self[(row, i)] = c * a + s * b;
            self[(row, j)] = c * b - s * a;
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n_cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n_cols + j]
    }
}

/// `(c, s, r)` with `c·a + s·b = r` and `−s·a + c·b = 0`.
fn givens<T: Real>(a: T, b: T) -> (T, T, T) {
    if b == T::zero() {
        return (T::one(), T::zero(), a);
    }
    let r = a.hypot(b);
    (a / r, b / r, r)
}

/// Tuning for [`generalized_schur`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QzOptions {
    /// Iteration budget per unit of dimension.
    pub max_sweeps_per_dim: usize,
    /// Accumulate `Q` and `Z`.
    pub accumulate: bool,
}

impl Default for QzOptions {
    fn default() -> Self {
        Self {
            max_sweeps_per_dim: 30,
            accumulate: true,
        }
    }
}

/// Result of the decomposition. `block_size[k]` is 1 for a real eigenvalue and
/// 2 for both rows of a complex-pair block.
#[derive(Debug, Clone)]
pub struct GeneralizedSchur<T> {
    pub s: Matrix<T>,
    pub t: Matrix<T>,
    pub q: Option<Matrix<T>>,
    pub z: Option<Matrix<T>>,
    pub block_size: Vec<u8>,
    pub sweeps: usize,
}

struct Work<T> {
    a: Matrix<T>,
    b: Matrix<T>,
    q: Option<Matrix<T>>,
    z: Option<Matrix<T>>,
    n: usize,
}

impl<T: Real> Work<T> {
    /// Row rotation on `(i, j)`, `i < j`, applied to both matrices and `Q`.
    fn rows(&mut self, i: usize, j: usize, c: T, s: T) {
        let n = self.n;
        self.a.rot_rows(i, j, c, s, i.saturating_sub(2)..n);
        self.b.rot_rows(i, j, c, s, i..n);
        if let Some(q) = self.q.as_mut() {
            q.rot_cols(i, j, c, s, 0..n);
        }
    }

    /// Column rotation on `(i, j)`, `i < j`, applied to both matrices and `Z`.
    fn cols(&mut self, i: usize, j: usize, c: T, s: T) {
        let n = self.n;
        self.a.rot_cols(i, j, c, s, 0..(j + 3).min(n));
        self.b.rot_cols(i, j, c, s, 0..(j + 1).min(n));
        if let Some(z) = self.z.as_mut() {
            z.rot_cols(i, j, c, s, 0..n);
        }
    }

    /// Column rotation on `(i, j)`, `i < j`, that zeroes `m[(row, i)]` against
    /// `m[(row, j)]`, where `m` is `B` when `on_b` and `A` otherwise.
    fn zero_col_entry(&mut self, on_b: bool, row: usize, i: usize, j: usize) {
        let m = if on_b { &self.b } else { &self.a };
        let (c, s, _) = givens(m[(row, j)], -m[(row, i)]);
        self.cols(i, j, c, s);
        if on_b {
            self.b[(row, i)] = T::zero();
        } else {
            self.a[(row, i)] = T::zero();
        }
    }

    /// Row rotation on `(i, i+1)` that zeroes `m[(i+1, col)]` against `m[(i, col)]`.
    fn zero_row_entry(&mut self, on_b: bool, i: usize, col: usize) {
        let m = if on_b { &self.b } else { &self.a };
        let (c, s, _) = givens(m[(i, col)], m[(i + 1, col)]);
        self.rows(i, i + 1, c, s);
        if on_b {
            self.b[(i + 1, col)] = T::zero();
        } else {
            self.a[(i + 1, col)] = T::zero();
        }
    }
}

/// Generalized real Schur form of the pencil `(A, B)`.
pub fn generalized_schur<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    opts: QzOptions,
) -> Result<GeneralizedSchur<T>> {
    let n = a.n_rows();
    if n == 0 || a.n_cols() != n || b.n_rows() != n || b.n_cols() != n {
        return Err(Error::invalid("QZ needs two square matrices of equal size"));
    }
    if a.data.iter().chain(&b.data).any(|v| !v.is_finite()) {
        return Err(Error::invalid("QZ input contains non-finite entries"));
    }
    let mut w = Work {
        a: a.clone(),
        b: b.clone(),
        q: opts.accumulate.then(|| Matrix::identity(n)),
        z: opts.accumulate.then(|| Matrix::identity(n)),
        n,
    };
    triangularize_b(&mut w);
    hessenberg_triangular(&mut w);
    let mut block_size = vec![1u8; n];
    let sweeps = iterate(&mut w, &mut block_size, opts.max_sweeps_per_dim * n)?;
    normalize_signs(&mut w, &block_size);
    Ok(GeneralizedSchur {
        s: w.a,
        t: w.b,
        q: w.q,
        z: w.z,
        block_size,
        sweeps,
    })
}

fn triangularize_b<T: Real>(w: &mut Work<T>) {
    let n = w.n;
    for j in 0..n {
        for i in (j + 1..n).rev() {
            if w.b[(i, j)] == T::zero() {
                continue;
            }
            let (c, s, _) = givens(w.b[(i - 1, j)], w.b[(i, j)]);
            // A is still full here, so rotate every column.
            w.a.rot_rows(i - 1, i, c, s, 0..n);
            w.b.rot_rows(i - 1, i, c, s, j..n);
            if let Some(q) = w.q.as_mut() {
                q.rot_cols(i - 1, i, c, s, 0..n);
            }
            w.b[(i, j)] = T::zero();
        }
    }
}

fn hessenberg_triangular<T: Real>(w: &mut Work<T>) {
    let n = w.n;
    if n < 3 {
        return;
    }
    for j in 0..n - 2 {
        for i in (j + 2..n).rev() {
            if w.a[(i, j)] == T::zero() {
                continue;
            }
            let (c, s, _) = givens(w.a[(i - 1, j)], w.a[(i, j)]);
            w.a.rot_rows(i - 1, i, c, s, j..n);
            w.b.rot_rows(i - 1, i, c, s, i - 1..n);
            if let Some(q) = w.q.as_mut() {
                q.rot_cols(i - 1, i, c, s, 0..n);
            }
            w.a[(i, j)] = T::zero();
            // Fill at B(i, i−1).
            let (c, s, _) = givens(w.b[(i, i)], -w.b[(i, i - 1)]);
            w.a.rot_cols(i - 1, i, c, s, 0..n);
            w.b.rot_cols(i - 1, i, c, s, 0..i + 1);
            if let Some(z) = w.z.as_mut() {
                z.rot_cols(i - 1, i, c, s, 0..n);
            }
            w.b[(i, i - 1)] = T::zero();
        }
    }
}

fn iterate<T: Real>(w: &mut Work<T>, block_size: &mut [u8], max_iter: usize) -> Result<usize> {
    let n = w.n;
    let eps = T::epsilon();
    let a_norm = w.a.frobenius().max(T::min_positive_value());
    let b_tol = eps * w.b.frobenius().max(T::min_positive_value());
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    loop {
        if hi == 0 {
            return Ok(total);
        }
        // Start of the unreduced block ending at `hi`.
        let mut l = hi;
        while l > 0 {
            let sub = w.a[(l, l - 1)].abs();
            let diag = w.a[(l - 1, l - 1)].abs() + w.a[(l, l)].abs();
            if sub <= eps * diag || sub <= eps * eps * a_norm {
                w.a[(l, l - 1)] = T::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        if let Some(k) = (l..=hi).find(|&k| w.b[(k, k)].abs() <= b_tol) {
            w.b[(k, k)] = T::zero();
            chase_zero(w, l, hi, k);
            since_deflation = 0;
            continue;
        }
        if l + 1 == hi {
            if split_2x2(w, l) {
                block_size[l] = 1;
                block_size[hi] = 1;
            } else {
                block_size[l] = 2;
                block_size[hi] = 2;
            }
            if hi < 2 {
                return Ok(total);
            }
            hi -= 2;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::QzNoConvergence {
                sweeps: total - 1,
                dim: n,
            });
        }
        double_shift_sweep(w, l, hi, since_deflation.is_multiple_of(10));
    }
}

/// Moves the zero at `B(k, k)` down to `B(hi, hi)` and splits off the
/// infinite eigenvalue there.
fn chase_zero<T: Real>(w: &mut Work<T>, l: usize, hi: usize, k: usize) {
    for j in k..hi {
        w.zero_row_entry(true, j, j + 1);
        if j > l {
            w.zero_col_entry(false, j + 1, j - 1, j);
        }
    }
    // B(hi, hi) = 0; zero A(hi, hi−1) against A(hi, hi).
    if hi > l {
        w.zero_col_entry(false, hi, hi - 1, hi);
    }
}

/// Splits the 2×2 block at `(i, i+1)` when its eigenvalues are real. Returns
/// `false` for a complex pair.
fn split_2x2<T: Real>(w: &mut Work<T>, i: usize) -> bool {
    let j = i + 1;
    let (a11, a12, a21, a22) = (w.a[(i, i)], w.a[(i, j)], w.a[(j, i)], w.a[(j, j)]);
    let (b11, b12, b22) = (w.b[(i, i)], w.b[(i, j)], w.b[(j, j)]);
    // α λ² − β λ + γ = 0
    let alpha = b11 * b22;
    let beta = a11 * b22 + a22 * b11 - a21 * b12;
    let gamma = a11 * a22 - a12 * a21;
    let disc = beta * beta - lit::<T>(4.0) * alpha * gamma;
    if disc < T::zero() {
        return false;
    }
    let root = beta + beta.signum() * disc.sqrt();
    let lambda = if root == T::zero() {
        T::zero()
    } else {
        root / (lit::<T>(2.0) * alpha)
    };
    let m11 = a11 - lambda * b11;
    let m12 = a12 - lambda * b12;
    let m21 = a21;
    let m22 = a22 - lambda * b22;
    let (v1, v2) = if m11.hypot(m12) >= m21.hypot(m22) {
        (-m12, m11)
    } else {
        (-m22, m21)
    };
    let nv = v1.hypot(v2);
    if nv > T::zero() {
        w.cols(i, j, v1 / nv, v2 / nv);
    }
    w.zero_row_entry(true, i, i);
    w.a[(j, i)] = T::zero();
    true
}

fn double_shift_sweep<T: Real>(w: &mut Work<T>, l: usize, h: usize, exceptional: bool) {
    let (a, b) = (&w.a, &w.b);
    // Bottom 2×2 of M = A B⁻¹.
    let m_h1h2 = a[(h - 1, h - 2)] / b[(h - 2, h - 2)];
    let m_h1h1 = (a[(h - 1, h - 1)] - m_h1h2 * b[(h - 2, h - 1)]) / b[(h - 1, h - 1)];
    let m_hh1 = a[(h, h - 1)] / b[(h - 1, h - 1)];
    let m_h1h = (a[(h - 1, h)] - m_h1h2 * b[(h - 2, h)] - m_h1h1 * b[(h - 1, h)]) / b[(h, h)];
    let m_hh = (a[(h, h)] - m_hh1 * b[(h - 1, h)]) / b[(h, h)];
    let (s, p) = if exceptional {
        let wgt = m_hh1.abs() + m_h1h2.abs();
        (lit::<T>(1.5) * wgt, wgt * wgt)
    } else {
        (m_h1h1 + m_hh, m_h1h1 * m_hh - m_h1h * m_hh1)
    };
    // Top-left entries of M.
    let m11 = a[(l, l)] / b[(l, l)];
    let m21 = a[(l + 1, l)] / b[(l, l)];
    let m12 = (a[(l, l + 1)] - m11 * b[(l, l + 1)]) / b[(l + 1, l + 1)];
    let m22 = (a[(l + 1, l + 1)] - m21 * b[(l, l + 1)]) / b[(l + 1, l + 1)];
    let m32 = a[(l + 2, l + 1)] / b[(l + 1, l + 1)];
    let mut x = m11 * m11 + m12 * m21 - s * m11 + p;
    let mut y = m21 * (m11 + m22 - s);
    let mut z = m32 * m21;

    for k in l..h - 1 {
        // Rows k..k+2: zero z against y, then y against x.
        let (c, sn, r) = givens(y, z);
        w.rows(k + 1, k + 2, c, sn);
        let (c2, sn2, _) = givens(x, r);
        w.rows(k, k + 1, c2, sn2);
        if k > l {
            w.a[(k + 1, k - 1)] = T::zero();
            w.a[(k + 2, k - 1)] = T::zero();
        }
        // Restore B: zero B(k+2, k+1), B(k+2, k), B(k+1, k).
        w.zero_col_entry(true, k + 2, k + 1, k + 2);
        w.zero_col_entry(true, k + 2, k, k + 2);
        w.zero_col_entry(true, k + 1, k, k + 1);
        x = w.a[(k + 1, k)];
        y = w.a[(k + 2, k)];
        z = if k + 3 <= h { w.a[(k + 3, k)] } else { T::zero() };
    }
    let (c, sn, _) = givens(x, y);
    w.rows(h - 1, h, c, sn);
    if h >= l + 2 {
        w.a[(h, h - 2)] = T::zero();
    }
    w.zero_col_entry(true, h, h - 1, h);
}

/// Makes `T(k, k) ≥ 0` on real 1×1 blocks by flipping row `k` of `S`, `T` and
/// column `k` of `Q`.
fn normalize_signs<T: Real>(w: &mut Work<T>, block_size: &[u8]) {
    let n = w.n;
    for k in 0..n {
        if block_size[k] != 1 || w.b[(k, k)] >= T::zero() {
            continue;
        }
        for j in 0..n {
            w.a[(k, j)] = -w.a[(k, j)];
            w.b[(k, j)] = -w.b[(k, j)];
        }
        if let Some(q) = w.q.as_mut() {
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
}

impl<T: Real> GeneralizedSchur<T> {
    /// `max(‖QᵀQ − I‖, ‖ZᵀZ − I‖)` in Frobenius norm, or `NaN` without
    /// accumulated factors.
    pub fn orthogonality_residual(&self) -> T {
        match (&self.q, &self.z) {
            (Some(q), Some(z)) => {
                let n = q.n_rows();
                let id = Matrix::identity(n);
                let rq = q.transpose().matmul(q).sub(&id).frobenius();
                let rz = z.transpose().matmul(z).sub(&id).frobenius();
                rq.max(rz)
            }
            _ => T::nan(),
        }
    }

    /// `(‖QSZᵀ − A‖ + ‖QTZᵀ − B‖) / (‖A‖ + ‖B‖)`, or `NaN` without factors.
    pub fn reconstruction_residual(&self, a: &Matrix<T>, b: &Matrix<T>) -> T {
        match (&self.q, &self.z) {
            (Some(q), Some(z)) => {
                let zt = z.transpose();
                let ra = q.matmul(&self.s).matmul(&zt).sub(a).frobenius();
                let rb = q.matmul(&self.t).matmul(&zt).sub(b).frobenius();
                (ra + rb) / (a.frobenius() + b.frobenius()).max(T::min_positive_value())
            }
            _ => T::nan(),
        }
    }

    /// Largest entry below the block-diagonal structure of `S` and below the
    /// diagonal of `T`, relative to the matrix norms.
    pub fn structure_defect(&self) -> T {
        let n = self.s.n_rows();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..i {
                let in_block = i == j + 1 && self.block_size[i] == 2 && self.block_size[j] == 2;
                if !in_block {
                    worst = worst.max(self.s[(i, j)].abs());
                }
                worst = worst.max(self.t[(i, j)].abs());
            }
        }
        worst / (self.s.frobenius() + self.t.frobenius()).max(T::min_positive_value())
    }

    /// Iteration count per unit dimension.
    pub fn sweeps_per_dim(&self) -> T {
        from_usize::<T>(self.sweeps) / from_usize(self.s.n_rows())
    }
}
