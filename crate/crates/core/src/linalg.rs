//! Small dense linear algebra: a row-major matrix, Householder QR for least
//! squares and rank checks, and Cholesky solves for Newton steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(alloc::format!(
                "{} values for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(alloc::format!("row {i} has {} values, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &w) in v.iter().enumerate() {
            axpy(w, self.row(r), &mut out);
        }
        out
    }

    /// `selfᵀ · diag(w) · self`.
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for (r, &wr) in w.iter().enumerate() {
            let x = self.row(r);
            for i in 0..p {
                let xi = wr * x[i];
                for j in 0..=i {
                    g.data[i * p + j] += xi * x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                g.data[j * p + i] = g.data[i * p + j];
            }
        }
        g
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `y += a·x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Householder QR of a tall matrix, kept in compact form.
pub struct Qr {
    /// Householder vectors below the diagonal, R on and above it.
    qr: Matrix,
    /// Scalar factors of the reflectors.
    tau: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut qr = a.clone();
        let mut tau = vec![0.0; n];
        for k in 0..n.min(m) {
            let mut norm = 0.0;
            for i in k..m {
                let v = qr.get(i, k);
                norm += v * v;
            }
            let norm = sqrt(norm);
            if norm == 0.0 {
                continue;
            }
            let akk = qr.get(k, k);
            let alpha = if akk > 0.0 { -norm } else { norm };
            let v0 = akk - alpha;
            // v = [1, a_{k+1..}/v0], tau = -v0/alpha
            for i in (k + 1)..m {
                let v = qr.get(i, k) / v0;
                qr.set(i, k, v);
            }
            tau[k] = -v0 / alpha;
            qr.set(k, k, alpha);
            for j in (k + 1)..n {
                let mut s = qr.get(k, j);
                for i in (k + 1)..m {
                    s += qr.get(i, k) * qr.get(i, j);
                }
                s *= tau[k];
                qr.set(k, j, qr.get(k, j) - s);
                for i in (k + 1)..m {
                    let v = qr.get(i, j) - s * qr.get(i, k);
                    qr.set(i, j, v);
                }
            }
        }
        Self { qr, tau }
    }

    /// Numerical rank from the diagonal of R.
    pub fn rank(&self) -> usize {
        let n = self.qr.cols.min(self.qr.rows);
        let diag: Vec<f64> = (0..n).map(|i| self.qr.get(i, i).abs()).collect();
        let max = diag.iter().cloned().fold(0.0f64, f64::max);
        if max == 0.0 {
            return 0;
        }
        let tol = max * 1e-10 * (self.qr.rows.max(self.qr.cols) as f64);
        diag.iter().filter(|&&d| d > tol).count()
    }

    /// Least-squares solution of `A x ≈ b`. Requires full column rank.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = (self.qr.rows, self.qr.cols);
        if b.len() != m {
            return Err(Error::Shape(alloc::format!("rhs has {} rows, expected {m}", b.len())));
        }
        let rank = self.rank();
        if rank < n || m < n {
            return Err(Error::RankDeficient { rank, cols: n });
        }
        let mut y = b.to_vec();
        for k in 0..n {
            let mut s = y[k];
            for i in (k + 1)..m {
                s += self.qr.get(i, k) * y[i];
            }
            s *= self.tau[k];
            y[k] -= s;
            for i in (k + 1)..m {
                y[i] -= s * self.qr.get(i, k);
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in (k + 1)..n {
                s -= self.qr.get(k, j) * x[j];
            }
            x[k] = s / self.qr.get(k, k);
        }
        Ok(x)
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot is not positive.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, i, sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = b` given the lower factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_least_squares_recovers_exact_solution() {
        let a = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ])
        .unwrap();
        let b: Vec<f64> = (0..4).map(|i| 2.0 + 0.5 * i as f64).collect();
        let x = Qr::new(&a).solve_least_squares(&b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qr_detects_collinear_columns() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let qr = Qr::new(&a);
        assert_eq!(qr.rank(), 1);
        assert!(matches!(qr.solve_least_squares(&[1.0, 2.0, 3.0]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &[2.0, 1.0]);
        let back = a.mul_vec(&x);
        assert!((back[0] - 2.0).abs() < 1e-12 && (back[1] - 1.0).abs() < 1e-12);
        assert!(cholesky(&Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).is_none());
    }

    #[test]
    fn weighted_gram_matches_explicit_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.0]]).unwrap();
        let w = [1.0, 2.0, 4.0];
        let g = a.weighted_gram(&w);
        let at = a.transpose();
        for i in 0..2 {
            for j in 0..2 {
                let expect: f64 = (0..3).map(|r| at.get(i, r) * w[r] * a.get(r, j)).sum();
                assert!((g.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }
}
