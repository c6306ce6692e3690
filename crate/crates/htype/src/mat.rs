//! Minimal dense matrix type used for the structure matrices J_j.
//!
//! The matrices involved are small (2n x 2n with 2n <= 32 in practice), so a
//! plain row-major `Vec` with the handful of operations we need beats pulling
//! in a linear-algebra dependency.

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
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

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for j in 0..self.cols {
                acc = acc + self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// Max absolute entry, used as the deviation norm in verification reports.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &a| acc.max(a.abs()))
    }

    /// Kronecker product, `self (x) other`.
    pub fn kron(&self, other: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == T::zero() {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Block-diagonal direct sum of `copies` copies of `self`.
    pub fn direct_sum_copies(&self, copies: usize) -> Mat<T> {
        let mut out = Mat::zeros(self.rows * copies, self.cols * copies);
        for c in 0..copies {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    out[(c * self.rows + i, c * self.cols + j)] = self[(i, j)];
                }
            }
        }
        out
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)] == T::zero() {
                return T::zero();
            }
            if piv != col {
                for j in 0..n {
                    let tmp = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                det = -det;
            }
            let p = a[(col, col)];
            det = det * p;
            for r in (col + 1)..n {
                let f = a[(r, col)] / p;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                }
            }
        }
        det
    }

    /// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
    /// Returns (eigenvalues, orthogonal matrix V with eigenvectors as columns).
    pub fn sym_eigen(&self) -> (Vec<T>, Mat<T>) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Mat::identity(n);
        let tol = T::epsilon() * T::of(n as f64);
        for _sweep in 0..60 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= T::epsilon() * (a[(p, p)].abs() + a[(q, q)].abs()) {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                    let t = {
                        let s = if theta >= T::zero() { T::one() } else { -T::one() };
                        s / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let eigs = (0..n).map(|i| a[(i, i)]).collect();
        (eigs, v)
    }

    /// Symmetric positive-definite square root.
    pub fn spd_sqrt(&self) -> Mat<T> {
        let (eigs, v) = self.sym_eigen();
        self.spd_power(&eigs, &v, |e| e.sqrt())
    }

    /// Inverse of the symmetric positive-definite square root.
    pub fn spd_inv_sqrt(&self) -> Mat<T> {
        let (eigs, v) = self.sym_eigen();
        self.spd_power(&eigs, &v, |e| T::one() / e.sqrt())
    }

    fn spd_power(&self, eigs: &[T], v: &Mat<T>, f: impl Fn(T) -> T) -> Mat<T> {
        let n = self.rows;
        let mut d = Mat::zeros(n, n);
        for i in 0..n {
            assert!(eigs[i] > T::zero(), "matrix is not positive definite");
            d[(i, i)] = f(eigs[i]);
        }
        v.matmul(&d).matmul(&v.transpose())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_matmul() {
        let r: Mat<f64> = Mat::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert_eq!(r.matvec(&[1.0, 0.0]), vec![0.0, 1.0]);
        let r2 = r.matmul(&r);
        assert_eq!(r2, Mat::identity(2).scale(-1.0));
    }

    #[test]
    fn jacobi_eigen_recovers_spd_sqrt() {
        // A = Q D Q^T with known eigenvalues
        let a: Mat<f64> = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = a.spd_sqrt();
        let back = s.matmul(&s);
        assert!(back.sub(&a).max_abs() < 1e-12);
        let inv_s = a.spd_inv_sqrt();
        assert!(s.matmul(&inv_s).sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn kron_dimensions() {
        let a: Mat<f64> = Mat::identity(2);
        let b: Mat<f64> = Mat::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let k = a.kron(&b);
        assert_eq!((k.rows, k.cols), (4, 4));
        assert_eq!(k[(0, 1)], -1.0);
        assert_eq!(k[(2, 3)], -1.0);
        assert_eq!(k[(0, 3)], 0.0);
    }
}
