//! Dense linear algebra over a generic [`Real`] scalar.

use crate::error::{KnockoffError, Result};
use crate::scalar::Real;
use std::ops::{Index, IndexMut};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RealMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(KnockoffError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(KnockoffError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / cols.max(1) + 1,
                pos % cols.max(1) + 1
            )));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(KnockoffError::Dimension("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_cols(cols: &[Vec<T>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, |x| x.len());
        if cols.iter().any(|x| x.len() != r) {
            return Err(KnockoffError::Dimension("ragged columns".into()));
        }
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            m.set_col(j, col);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = x;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "t_matmul shape mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = other.row(r);
            for (i, &a) in arow.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        RealMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        RealMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: T) -> Self {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * c).collect() }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                m.data[i * idx.len() + jj] = self.data[i * self.cols + j];
            }
        }
        m
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        RealMatrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn row_range(&self, start: usize, end: usize) -> Self {
        RealMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn hstack(parts: &[&Self]) -> Self {
        let rows = parts.first().map_or(0, |m| m.rows);
        assert!(parts.iter().all(|m| m.rows == rows), "hstack row mismatch");
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        RealMatrix { rows, cols, data }
    }

    pub fn vstack(parts: &[&Self]) -> Self {
        let cols = parts.first().map_or(0, |m| m.cols);
        assert!(parts.iter().all(|m| m.cols == cols), "vstack column mismatch");
        let mut data = Vec::new();
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        RealMatrix { rows: data.len() / cols.max(1), cols, data }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let two = T::c(2.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) / two;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> RealMatrix<U> {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl<T> Index<(usize, usize)> for RealMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for RealMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Max-entry relative difference `‖a − b‖_max / max(‖b‖_max, tiny)`.
pub fn rel_diff<T: Real>(a: &RealMatrix<T>, b: &RealMatrix<T>) -> T {
    let scale = b.max_abs().max(T::min_positive_value());
    a.sub(b).max_abs() / scale
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`. Fails unless every pivot is
/// strictly positive, so success certifies positive definiteness.
pub fn cholesky<T: Real>(a: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(KnockoffError::Dimension("cholesky of a non-square matrix".into()));
    }
    let mut l = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(KnockoffError::NotPositiveDefinite(format!("pivot {} is {}", j + 1, d)));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Ok(l)
}

pub fn is_positive_definite<T: Real>(a: &RealMatrix<T>) -> bool {
    cholesky(a).is_ok()
}

/// Solves `L Lᵀ x = b` in place for a single right-hand side.
pub fn chol_solve_vec<T: Real>(l: &RealMatrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[(i, k)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l[(k, i)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves `A X = B` given the Cholesky factor of `A`.
pub fn chol_solve<T: Real>(l: &RealMatrix<T>, b: &RealMatrix<T>) -> RealMatrix<T> {
    let mut out = RealMatrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let mut col = b.col(j);
        chol_solve_vec(l, &mut col);
        out.set_col(j, &col);
    }
    out
}

/// Householder reduction of a symmetric matrix to tridiagonal form; returns the diagonal
/// and the off-diagonal.
pub fn tridiagonalize<T: Real>(a: &RealMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let two = T::c(2.0);
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: T = ((k + 1)..n).map(|i| m[(i, k)] * m[(i, k)]).sum();
        if alpha_sq == T::zero() {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let alpha = if x0 > T::zero() { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        let mut v = vec![T::zero(); n];
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = m[(i, k)];
        }
        let vnorm_sq: T = v.iter().map(|&x| x * x).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        // m <- H m H with H = I - 2 v vᵀ / (vᵀv)
        let mut w = vec![T::zero(); n];
        for i in 0..n {
            let mut s = T::zero();
            for j in (k + 1)..n {
                s += m[(i, j)] * v[j];
            }
            w[i] = s * two / vnorm_sq;
        }
        let kappa: T = ((k + 1)..n).map(|i| v[i] * w[i]).sum::<T>() / vnorm_sq;
        for i in 0..n {
            w[i] -= kappa * v[i];
        }
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * w[j] + w[i] * v[j];
                if upd != T::zero() {
                    m[(i, j)] -= upd;
                }
            }
        }
    }
    let d = (0..n).map(|i| m[(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix `(d, e)` strictly below `x`.
fn sturm_count<T: Real>(d: &[T], e: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..d.len() {
        let off = if i == 0 { T::zero() } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix, by bisection.
pub fn tridiagonal_eigenvalue<T: Real>(d: &[T], e: &[T], k: usize, tol: T) -> T {
    let n = d.len();
    assert!(k < n);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { T::zero() } + if i + 1 < n { e[i].abs() } else { T::zero() };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pad = (hi - lo).abs() * T::c(1e-12) + tol;
    lo -= pad;
    hi += pad;
    while hi - lo > tol * (T::one() + lo.abs().max(hi.abs())) {
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / T::c(2.0)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_extreme_eigenvalues<T: Real>(a: &RealMatrix<T>, tol: T) -> (T, T) {
    let n = a.rows();
    let (d, e) = tridiagonalize(a);
    (tridiagonal_eigenvalue(&d, &e, 0, tol), tridiagonal_eigenvalue(&d, &e, n - 1, tol))
}

pub fn lambda_min<T: Real>(a: &RealMatrix<T>) -> T {
    let (d, e) = tridiagonalize(a);
    tridiagonal_eigenvalue(&d, &e, 0, T::c(1e-10))
}

/// Relative tolerance below which a projected column counts as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Modified Gram–Schmidt with one reorthogonalization pass. On success returns orthonormal
/// columns spanning the input; on rank deficiency returns the offending column index.
pub fn orthonormalize_columns<T: Real>(cols: Vec<Vec<T>>) -> std::result::Result<Vec<Vec<T>>, usize> {
    let tol = T::c(RANK_TOL);
    let mut q: Vec<Vec<T>> = Vec::with_capacity(cols.len());
    for (idx, mut v) in cols.into_iter().enumerate() {
        let pre = dot(&v, &v).sqrt();
        if pre == T::zero() {
            return Err(idx);
        }
        for _pass in 0..2 {
            for qk in &q {
                let r = dot(qk, &v);
                for (vi, &qi) in v.iter_mut().zip(qk) {
                    *vi -= r * qi;
                }
            }
        }
        let post = dot(&v, &v).sqrt();
        if !(post >= tol * pre) {
            return Err(idx);
        }
        for vi in v.iter_mut() {
            *vi /= post;
        }
        q.push(v);
    }
    Ok(q)
}
