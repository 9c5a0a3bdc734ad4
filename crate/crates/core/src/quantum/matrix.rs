//! Dense square complex matrices.
//!
//! Every operator in the link model lives on a space of at most a few dozen
//! dimensions, so a flat row-major `Vec` is all the structure we need.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T: Real> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Build from row-major entries. Panics if `entries.len()` is not a square.
    pub fn from_rows(entries: Vec<Complex<T>>) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, entries.len(), "matrix entries must form a square");
        Self { dim, data: entries }
    }

    pub fn from_real_rows(entries: &[f64]) -> Self {
        Self::from_rows(entries.iter().map(|&x| Complex::new(T::lit(x), T::zero())).collect())
    }

    pub fn from_diag(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Projector `|ψ⟩⟨ψ|`.
    pub fn outer(psi: &[Complex<T>]) -> Self {
        Self::from_fn(psi.len(), |r, c| psi[r] * psi[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| *x * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self[(r1, c1)];
                if a.is_zero() {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out[(r1 * m + r2, c1 * m + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                let row = &self.data[r * self.dim..(r + 1) * self.dim];
                row.iter().zip(v).fold(Complex::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `A B A†`, the conjugation used by every Kraus application.
    pub fn sandwich(&self, inner: &Self) -> Self {
        &(self * inner) * &self.adjoint()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise modulus of `self − self†`.
    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_zero_entry(&self, r: usize, c: usize) -> bool {
        self[(r, c)].is_zero()
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    ///
    /// Uses cyclic Jacobi on the real symmetric embedding `[[Re, −Im], [Im, Re]]`,
    /// whose spectrum is that of the Hermitian matrix with every eigenvalue doubled.
    pub fn min_hermitian_eigenvalue(&self) -> T {
        self.hermitian_eigenvalues().into_iter().fold(T::infinity(), T::min)
    }

    /// Eigenvalues of a Hermitian matrix (ascending, each listed once).
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let m = 2 * n;
        let mut a = vec![T::zero(); m * m];
        for r in 0..n {
            for c in 0..n {
                let z = self[(r, c)];
                a[r * m + c] = z.re;
                a[(r + n) * m + (c + n)] = z.re;
                a[(r + n) * m + c] = z.im;
                a[r * m + (c + n)] = -z.im;
            }
        }
        let mut eig = jacobi_symmetric_eigenvalues(&mut a, m);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        // Each eigenvalue appears twice in the embedding.
        eig.into_iter().step_by(2).collect()
    }
}

fn jacobi_symmetric_eigenvalues<T: Real>(a: &mut [T], m: usize) -> Vec<T> {
    let tol = T::epsilon() * T::lit(1e-2);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[p * m + q] * a[p * m + q];
            }
        }
        let scale: T = (0..m).map(|i| a[i * m + i] * a[i * m + i]).fold(T::zero(), |s, x| s + x);
        if off <= tol * tol * (scale + T::min_positive_value()) || off.is_zero() {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

/// Pivoted Cholesky factor of a Hermitian positive-semidefinite matrix:
/// returns vectors `v_k` with `M = Σ v_k v_k†`, dropping pivots below `tol`.
pub fn psd_factor<T: Real>(m: &Matrix<T>, tol: T) -> Vec<Vec<Complex<T>>> {
    let n = m.dim();
    let mut r = m.clone();
    let mut out = Vec::new();
    let mut used = vec![false; n];
    for _ in 0..n {
        let (j, d) = (0..n)
            .filter(|&i| !used[i])
            .map(|i| (i, r[(i, i)].re))
            .fold((usize::MAX, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if j == usize::MAX || d <= tol {
            break;
        }
        used[j] = true;
        let s = d.sqrt();
        let v: Vec<Complex<T>> = (0..n).map(|i| r[(i, j)] / s).collect();
        for a in 0..n {
            for b in 0..n {
                let upd = v[a] * v[b].conj();
                r[(a, b)] -= upd;
            }
        }
        out.push(v);
    }
    out
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[r * self.dim + c]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[r * self.dim + c]
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.is_zero() {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * *b;
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

/// Compressed operator for repeated matrix–vector products in trajectory sampling.
#[derive(Clone, Debug)]
pub struct SparseOp<T: Real> {
    dim: usize,
    entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Real> SparseOp<T> {
    pub fn from_dense(m: &Matrix<T>) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if !v.is_zero() {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = self · v` (overwrites `out`).
    pub fn apply_into(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        out.iter_mut().for_each(|x| *x = Complex::zero());
        for &(r, c, a) in &self.entries {
            out[r] += a * v[c];
        }
    }

    pub fn entries(&self) -> &[(usize, usize, Complex<T>)] {
        &self.entries
    }

    /// `acc += K ρ K†` with `K = self`.
    pub fn sandwich_into(&self, rho: &Matrix<T>, acc: &mut Matrix<T>) {
        let n = self.dim;
        let mut left = vec![Complex::<T>::zero(); n * n];
        for &(r, c, a) in &self.entries {
            let src = &rho.data[c * n..(c + 1) * n];
            let dst = &mut left[r * n..(r + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * *s;
            }
        }
        for &(r, c, a) in &self.entries {
            let ac = a.conj();
            for row in 0..n {
                let v = left[row * n + c];
                if !v.is_zero() {
                    acc.data[row * n + r] += v * ac;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = Matrix::<f64>::identity(2);
        assert_eq!(i2.kron(&i2), Matrix::identity(4));
    }

    #[test]
    fn eigenvalues_of_pauli_y() {
        let y = Matrix::<f64>::from_rows(vec![C::new(0.0, 0.0), C::new(0.0, -1.0), C::new(0.0, 1.0), C::new(0.0, 0.0)]);
        let ev = y.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let m = Matrix::<f64>::from_real_rows(&[1.0, 0.5, 0.2, 0.5, 1.0, 0.5, 0.2, 0.5, 1.0]);
        let vs = psd_factor(&m, 1e-14);
        let mut acc = Matrix::zeros(3);
        for v in &vs {
            acc = &acc + &Matrix::outer(v);
        }
        assert!(acc.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn sparse_matches_dense() {
        let m = Matrix::<f64>::from_real_rows(&[0.0, 2.0, 1.0, 0.0]);
        let v = vec![C::new(1.0, 1.0), C::new(-2.0, 0.5)];
        let mut out = vec![C::new(0.0, 0.0); 2];
        SparseOp::from_dense(&m).apply_into(&v, &mut out);
        assert_eq!(out, m.matvec(&v));
    }
}
