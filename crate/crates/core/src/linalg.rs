//! Dense row-major matrices and the handful of decompositions the crate needs.
//!
//! Small kernels used inside hot loops (products, Householder QR, Cholesky,
//! Jacobi eigenvalues) are generic. Decompositions of large or
//! non-symmetric matrices (SVD pseudo-inverse, spectral radius) go through
//! `nalgebra` in double precision.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        matmul_into(self, other, &mut out);
        out
    }

    /// `out = self · x`.
    #[inline]
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out += selfᵀ · x`.
    #[inline]
    pub fn tmatvec_acc(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
    }

    /// `self += scale · u vᵀ`.
    #[inline]
    pub fn add_outer(&mut self, scale: T, u: &[T], v: &[T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            let s = scale * ui;
            if s == T::zero() {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += s * vj;
            }
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].as_f64())
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| T::lit(m[(i, j)]))
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `out = a · b` without allocating.
pub fn matmul_into<T: Scalar>(a: &Mat<T>, b: &Mat<T>, out: &mut Mat<T>) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(out.shape(), (a.rows, b.cols));
    out.data.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == T::zero() {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// Householder QR of a tall or square matrix, overwriting `a` with the thin
/// orthonormal factor `Q` and writing the diagonal of `R` into `r_diag`.
///
/// The sign convention makes every `R` diagonal entry non-negative, so `Q`
/// is the Gram-Schmidt basis of the columns of `a`.
pub fn qr_in_place<T: Scalar>(a: &mut Mat<T>, r_diag: &mut [T], work: &mut QrWork<T>) {
    let (m, n) = a.shape();
    assert!(m >= n);
    assert_eq!(r_diag.len(), n);
    work.resize(m, n);
    // Householder reflectors stored column-wise in `work.v`.
    let r = &mut work.r;
    r.data.copy_from_slice(&a.data);
    for k in 0..n {
        let mut alpha = T::zero();
        for i in k..m {
            alpha += r[(i, k)] * r[(i, k)];
        }
        alpha = alpha.sqrt();
        let x0 = r[(k, k)];
        let sign = if x0 >= T::zero() { T::one() } else { -T::one() };
        let v = &mut work.v[k * m..(k + 1) * m];
        v.iter_mut().for_each(|e| *e = T::zero());
        for i in k..m {
            v[i] = r[(i, k)];
        }
        v[k] += sign * alpha;
        let vnorm2: T = v[k..].iter().map(|&e| e * e).sum();
        if vnorm2 > T::zero() {
            for j in k..n {
                let mut s = T::zero();
                for i in k..m {
                    s += v[i] * r[(i, j)];
                }
                let f = (s + s) / vnorm2;
                for i in k..m {
                    r[(i, j)] -= f * v[i];
                }
            }
        }
        work.vnorm2[k] = vnorm2;
    }
    // Accumulate the thin Q = H_0 H_1 ... H_{n-1} [I; 0].
    a.data.iter_mut().for_each(|e| *e = T::zero());
    for j in 0..n {
        a[(j, j)] = T::one();
    }
    for k in (0..n).rev() {
        let vnorm2 = work.vnorm2[k];
        if vnorm2 == T::zero() {
            continue;
        }
        let v = &work.v[k * m..(k + 1) * m];
        for j in 0..n {
            let mut s = T::zero();
            for i in k..m {
                s += v[i] * a[(i, j)];
            }
            let f = (s + s) / vnorm2;
            for i in k..m {
                a[(i, j)] -= f * v[i];
            }
        }
    }
    // Flip signs so that diag(R) >= 0.
    for k in 0..n {
        let d = r[(k, k)];
        if d < T::zero() {
            for i in 0..m {
                a[(i, k)] = -a[(i, k)];
            }
        }
        r_diag[k] = d.abs();
    }
}

/// Scratch buffers for [`qr_in_place`].
#[derive(Clone, Debug)]
pub struct QrWork<T> {
    r: Mat<T>,
    v: Vec<T>,
    vnorm2: Vec<T>,
}

impl<T: Scalar> Default for QrWork<T> {
    fn default() -> Self {
        Self {
            r: Mat::zeros(0, 0),
            v: Vec::new(),
            vnorm2: Vec::new(),
        }
    }
}

impl<T: Scalar> QrWork<T> {
    fn resize(&mut self, m: usize, n: usize) {
        if self.r.shape() != (m, n) {
            self.r = Mat::zeros(m, n);
            self.v = vec![T::zero(); m * n];
            self.vnorm2 = vec![T::zero(); n];
        }
    }
}

impl<T: Scalar> Default for Mat<T> {
    fn default() -> Self {
        Self::zeros(0, 0)
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky",
            expected: n,
            got: a.cols(),
        });
    }
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A X = B` given the Cholesky factor `L` of `A`.
pub fn cholesky_solve<T: Scalar>(l: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    assert_eq!(b.rows(), n);
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Mat<T>) -> Vec<T> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)] * m[(i, j)];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Largest singular value (operator 2-norm).
pub fn spectral_norm<T: Scalar>(a: &Mat<T>) -> T {
    let ata = if a.rows() >= a.cols() {
        a.transpose().matmul(a)
    } else {
        a.matmul(&a.transpose())
    };
    symmetric_eigenvalues(&ata)
        .first()
        .map_or(T::zero(), |&l| l.max(T::zero()).sqrt())
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pseudo_inverse<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    let m = a.to_nalgebra();
    let scale = m.amax().max(1.0);
    let tol = f64::EPSILON * (a.rows().max(a.cols()) as f64) * scale;
    let pinv = m
        .pseudo_inverse(tol)
        .map_err(|e| Error::InvalidArgument(format!("pseudo-inverse failed: {e}")))?;
    Ok(Mat::from_nalgebra(&pinv))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius<T: Scalar>(a: &Mat<T>) -> f64 {
    if a.rows() == 0 {
        return 0.0;
    }
    a.to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// 2-norm condition number of a symmetric positive semi-definite matrix.
pub fn spd_condition_number<T: Scalar>(a: &Mat<T>) -> f64 {
    let eig = a.to_nalgebra().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) -> bool {
        a.sub(b).max_abs() < tol
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let a = Mat::from_rows(&[&[2.0, -1.0, 0.5], &[1.0, 3.0, -2.0], &[0.0, 1.0, 4.0], &[1.0, 1.0, 1.0]]);
        let mut q = a.clone();
        let mut d = vec![0.0; 3];
        let mut work = QrWork::default();
        qr_in_place(&mut q, &mut d, &mut work);
        let qtq = q.transpose().matmul(&q);
        assert!(close(&qtq, &Mat::identity(3), 1e-12));
        // R = Qᵀ A must be upper triangular with the reported diagonal.
        let r = q.transpose().matmul(&a);
        for i in 0..3 {
            assert!((r[(i, i)] - d[i]).abs() < 1e-12);
            assert!(d[i] > 0.0);
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let b = Mat::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &b);
        assert!(close(&a.matmul(&x), &b, 1e-12));
        let not_pd = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(cholesky(&not_pd), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn jacobi_eigenvalues_and_spectral_norm() {
        let a: Mat<f64> = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        let d: Mat<f64> = Mat::from_diag(&[0.5, -3.0, 2.0]);
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_row_vector() {
        let b: Mat<f64> = Mat::from_rows(&[&[1.0, 0.0]]);
        let p = pseudo_inverse(&b).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15 && p[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn spectral_radius_of_rotation_block() {
        // Complex pair 0.6 ± 0.8i has modulus 1.
        let a = Mat::from_rows(&[&[0.6, -0.8, 0.0], &[0.8, 0.6, 0.0], &[0.0, 0.0, 0.3]]);
        assert!((spectral_radius(&a) - 1.0).abs() < 1e-12);
    }
}
