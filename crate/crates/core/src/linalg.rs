//! Dense determinants (float LU and fraction-free integer), Pfaffians of
//! skew-symmetric matrices, and a cyclic Jacobi eigensolver for the small
//! symmetric/Hermitian matrices drawn by the random-matrix samplers.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Square real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self.get(j, i))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let n = self.n;
        for k in 0..n {
            self.data.swap(a * n + k, b * n + k);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let n = self.n;
        for k in 0..n {
            self.data.swap(k * n + a, k * n + b);
        }
    }
}

/// Determinant as (sign, ln|det|). A singular matrix yields (0, -inf).
pub fn ln_determinant(m: &Matrix) -> (f64, f64) {
    let n = m.n;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a.get(i, k).abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if p != k {
            a.swap_rows(p, k);
            sign = -sign;
        }
        let piv = a.get(k, k);
        if piv < 0.0 {
            sign = -sign;
        }
        log_abs += piv.abs().ln();
        for i in (k + 1)..n {
            let f = a.get(i, k) / piv;
            if f != 0.0 {
                for j in (k + 1)..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
    }
    (sign, log_abs)
}

/// LU determinant with partial pivoting.
pub fn determinant(m: &Matrix) -> f64 {
    let n = m.n;
    if n == 0 {
        return 1.0;
    }
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a.get(i, k).abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap_rows(p, k);
            det = -det;
        }
        let piv = a.get(k, k);
        det *= piv;
        for i in (k + 1)..n {
            let f = a.get(i, k) / piv;
            if f != 0.0 {
                for j in (k + 1)..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
    }
    det
}

/// Fraction-free (Bareiss) determinant over the integers.
pub fn bareiss_determinant(rows: &[Vec<BigInt>]) -> BigInt {
    let n = rows.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let mut sign_neg = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match ((k + 1)..n).find(|&i| !a[i][k].is_zero()) {
                Some(p) => {
                    a.swap(p, k);
                    sign_neg = !sign_neg;
                }
                None => return BigInt::zero(),
            }
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign_neg {
        -d
    } else {
        d
    }
}

/// Exact Pfaffian of an integer skew matrix by expansion along the first
/// row. Cost is (n-1)!!, so meant for n <= 10.
pub fn pfaffian_exact(a: &[Vec<BigInt>]) -> BigInt {
    let idx: Vec<usize> = (0..a.len()).collect();
    if idx.len() % 2 == 1 {
        return BigInt::zero();
    }
    pf_exact_rec(a, &idx)
}

fn pf_exact_rec(a: &[Vec<BigInt>], idx: &[usize]) -> BigInt {
    if idx.is_empty() {
        return BigInt::one();
    }
    let first = idx[0];
    let mut total = BigInt::zero();
    for k in 1..idx.len() {
        let entry = &a[first][idx[k]];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|&(p, _)| p + 1 != k).map(|(_, &v)| v).collect();
        let term = entry * pf_exact_rec(a, &rest);
        if k % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Even-dimensional skew-symmetric matrix built from its strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    inner: Matrix,
}

impl SkewMatrix {
    /// `upper(i, j)` is queried for `i < j` only.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("Pfaffian needs even dimension, got {n}")));
        }
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = upper(i, j);
                m.set(i, j, v);
                m.set(j, i, -v);
            }
        }
        Ok(SkewMatrix { inner: m })
    }

    /// Validates antisymmetry exactly (zero tolerance).
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        let n = m.dim();
        if !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("Pfaffian needs even dimension, got {n}")));
        }
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::NotStructured("skew-symmetric"));
            }
            for j in (i + 1)..n {
                if m.get(i, j) != -m.get(j, i) {
                    return Err(Error::NotStructured("skew-symmetric"));
                }
            }
        }
        Ok(SkewMatrix { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }
}

/// Pfaffian by skew Gaussian elimination (Parlett–Reid style, pivoting on
/// the largest sub-diagonal entry of the current column).
pub fn pfaffian(a: &SkewMatrix) -> f64 {
    let (sign, ln) = ln_pfaffian(a);
    if sign == 0.0 {
        0.0
    } else {
        sign * ln.exp()
    }
}

/// Pfaffian as (sign, ln|Pf|).
pub fn ln_pfaffian(a: &SkewMatrix) -> (f64, f64) {
    let n = a.dim();
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut m = a.inner.clone();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    let mut k = 0;
    while k + 1 < n {
        let (kp, best) = ((k + 1)..n)
            .map(|i| (i, m.get(i, k).abs()))
            .fold((k + 1, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if kp != k + 1 {
            m.swap_rows(k + 1, kp);
            m.swap_cols(k + 1, kp);
            sign = -sign;
        }
        let piv = m.get(k, k + 1);
        if piv < 0.0 {
            sign = -sign;
        }
        log_abs += piv.abs().ln();
        if k + 2 < n {
            let tau: Vec<f64> = ((k + 2)..n).map(|j| m.get(k, j) / piv).collect();
            let col: Vec<f64> = ((k + 2)..n).map(|i| m.get(i, k + 1)).collect();
            for (ii, i) in ((k + 2)..n).enumerate() {
                for (jj, j) in ((k + 2)..n).enumerate() {
                    let v = m.get(i, j) + tau[ii] * col[jj] - col[ii] * tau[jj];
                    m.set(i, j, v);
                }
            }
        }
        k += 2;
    }
    (sign, log_abs)
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    let n = m.dim();
    let scale = m.data.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                return Err(Error::NotStructured("symmetric"));
            }
        }
    }
    Ok(())
}

/// Ascending eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let n = m.dim();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        let diag: f64 = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Complex Hermitian matrix stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    pub re: Matrix,
    pub im: Matrix,
}

impl HermitianMatrix {
    pub fn new(re: Matrix, im: Matrix) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::DimensionMismatch { expected: re.dim(), got: im.dim() });
        }
        check_symmetric(&re)?;
        let n = im.dim();
        let scale = im.data.iter().chain(re.data.iter()).fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            for j in i..n {
                if (im.get(i, j) + im.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::NotStructured("Hermitian"));
                }
            }
        }
        Ok(HermitianMatrix { re, im })
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }
}

/// Ascending eigenvalues of a Hermitian matrix via the real symmetric
/// embedding [[A, -B], [B, A]], whose spectrum is that of `A + iB` doubled.
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = h.dim();
    let big = Matrix::from_fn(2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => h.re.get(ii, jj),
            (0, 1) => -h.im.get(ii, jj),
            _ => h.im.get(ii, jj),
        }
    });
    let ev = symmetric_eigenvalues(&big)?;
    Ok(ev.into_iter().step_by(2).collect())
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::NotStructured("positive definite"));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    Ok(y)
}
