//! Two bosonic modes truncated at a total excitation number.
//!
//! Both the atomic spin-wave pair (⇓, ⇑) and the photonic time-bin or spatial
//! pair (E/L, U/D) are described by this space. All maps here conserve or
//! lower the total excitation number, so the truncation is closed under them.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::{psd_factor, Matrix};
use super::state::{KrausChannel, Observable, Outcome};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockPair {
    cutoff: usize,
    basis: Vec<[usize; 2]>,
}

impl FockPair {
    pub fn new(cutoff: usize) -> Self {
        let mut basis = Vec::new();
        for total in 0..=cutoff {
            for n1 in 0..=total {
                basis.push([total - n1, n1]);
            }
        }
        Self { cutoff, basis }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn occupation(&self, index: usize) -> [usize; 2] {
        self.basis[index]
    }

    pub fn total(&self, index: usize) -> usize {
        let [a, b] = self.basis[index];
        a + b
    }

    pub fn index(&self, n0: usize, n1: usize) -> Option<usize> {
        self.basis.iter().position(|&b| b == [n0, n1])
    }

    /// Labels such as `vac`, `E`, `L`, `EE`, `EL`, `LL`.
    pub fn labels(&self, names: [&str; 2]) -> Vec<String> {
        self.basis
            .iter()
            .map(|&[a, b]| {
                if a + b == 0 {
                    "vac".to_string()
                } else {
                    format!("{}{}", names[0].repeat(a), names[1].repeat(b))
                }
            })
            .collect()
    }

    /// Independent bosonic loss on each mode with transmissions `eta`.
    pub fn loss<T: Real>(&self, eta: [T; 2]) -> KrausChannel<T> {
        let n = self.dim();
        let mut ops = Vec::new();
        for k0 in 0..=self.cutoff {
            for k1 in 0..=(self.cutoff - k0) {
                let mut m = Matrix::zeros(n);
                let mut any = false;
                for (i, &[a, b]) in self.basis.iter().enumerate() {
                    if a < k0 || b < k1 {
                        continue;
                    }
                    let amp = loss_amp(a, k0, eta[0]) * loss_amp(b, k1, eta[1]);
                    if amp.is_zero() {
                        continue;
                    }
                    let j = self.index(a - k0, b - k1).expect("lower occupation in basis");
                    m[(j, i)] = Complex::new(amp, T::zero());
                    any = true;
                }
                if any {
                    ops.push(m);
                }
            }
        }
        KrausChannel::from_parts(ops, true)
    }

    /// Each excitation of mode `from` independently moves into mode `to` with probability `p`.
    pub fn transfer<T: Real>(&self, from: usize, p: T) -> KrausChannel<T> {
        let to = 1 - from;
        let n = self.dim();
        let mut ops = Vec::new();
        for k in 0..=self.cutoff {
            let mut m = Matrix::zeros(n);
            let mut any = false;
            for (i, occ) in self.basis.iter().enumerate() {
                let m_from = occ[from];
                if m_from < k {
                    continue;
                }
                let amp = (T::lit(binom(m_from, k)) * p.powi(k as i32) * (T::one() - p).powi((m_from - k) as i32)).sqrt();
                if amp.is_zero() {
                    continue;
                }
                let mut out = *occ;
                out[from] -= k;
                out[to] += k;
                let j = self.index(out[0], out[1]).expect("same total");
                m[(j, i)] = Complex::new(amp, T::zero());
                any = true;
            }
            if any {
                ops.push(m);
            }
        }
        KrausChannel::from_parts(ops, true)
    }

    /// Diagonal phase `exp(−i Σ n_m φ_m)`.
    pub fn phase<T: Real>(&self, phases: [T; 2]) -> Matrix<T> {
        let diag: Vec<Complex<T>> = self
            .basis
            .iter()
            .map(|&[a, b]| {
                let theta = -(T::lit(a as f64) * phases[0] + T::lit(b as f64) * phases[1]);
                Complex::new(theta.cos(), theta.sin())
            })
            .collect();
        Matrix::from_diag(&diag)
    }

    /// Random phase `exp(−i θ n_mode)` averaged over a distribution with
    /// characteristic function `c(k) = E[exp(−i k θ)]`.
    ///
    /// The channel multiplies `ρ_ij` by `c(n_i − n_j)`; its Kraus operators come
    /// from a pivoted Cholesky factor of the Toeplitz kernel `c(a − b)`.
    pub fn phase_noise<T: Real>(&self, mode: usize, char_fn: impl Fn(i64) -> Complex<T>) -> KrausChannel<T> {
        let levels = self.cutoff + 1;
        let kernel = Matrix::from_fn(levels, |a, b| char_fn(a as i64 - b as i64));
        let factors = psd_factor(&kernel, T::epsilon() * T::lit(16.0));
        let ops = factors
            .iter()
            .map(|v| {
                let diag: Vec<Complex<T>> = self.basis.iter().map(|occ| v[occ[mode]]).collect();
                Matrix::from_diag(&diag)
            })
            .collect();
        KrausChannel::from_parts(ops, true)
    }

    /// Incoherent addition of one excitation, split evenly between the modes,
    /// with probability `prob`. States already at the cutoff are left alone.
    pub fn inject<T: Real>(&self, prob: T) -> KrausChannel<T> {
        let n = self.dim();
        let mut ops = vec![Matrix::identity(n).scale_real((T::one() - prob).sqrt())];
        let half = (prob * T::lit(0.5)).sqrt();
        for mode in 0..2 {
            let mut m = Matrix::zeros(n);
            for (i, occ) in self.basis.iter().enumerate() {
                if occ[0] + occ[1] < self.cutoff {
                    let mut out = *occ;
                    out[mode] += 1;
                    let j = self.index(out[0], out[1]).expect("below cutoff");
                    m[(j, i)] = Complex::new(half, T::zero());
                }
            }
            ops.push(m);
        }
        let sat: Vec<Complex<T>> = self
            .basis
            .iter()
            .map(|occ| {
                if occ[0] + occ[1] == self.cutoff {
                    Complex::new(prob.sqrt(), T::zero())
                } else {
                    Complex::zero()
                }
            })
            .collect();
        ops.push(Matrix::from_diag(&sat));
        KrausChannel::from_parts(ops, true)
    }

    /// Representation of the passive mode transformation `b_k = Σ_i w[k][i] a_i`.
    ///
    /// Output mode 0 and 1 are the two detector ports.
    pub fn passive<T: Real>(&self, w: [[Complex<T>; 2]; 2]) -> Matrix<T> {
        let n = self.dim();
        let mut out = Matrix::zeros(n);
        for (i, &[n0, n1]) in self.basis.iter().enumerate() {
            // a_i† = Σ_k w[k][i] b_k†; expand (a_0†)^n0 (a_1†)^n1 as a polynomial in b†.
            let total = n0 + n1;
            let mut poly = vec![Complex::<T>::zero(); total + 1];
            poly[0] = Complex::one();
            let mut deg = 0;
            for (mode, count) in [(0usize, n0), (1usize, n1)] {
                for _ in 0..count {
                    let mut next = vec![Complex::<T>::zero(); total + 1];
                    for p in 0..=deg {
                        // index p counts powers of b_0†; the rest are b_1†.
                        next[p + 1] += poly[p] * w[0][mode];
                        next[p] += poly[p] * w[1][mode];
                    }
                    poly = next;
                    deg += 1;
                }
            }
            let norm_in = (factorial(n0) * factorial(n1)).sqrt();
            for (p, coeff) in poly.iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                let (m0, m1) = (p, total - p);
                let j = self.index(m0, m1).expect("same total");
                let scale = T::lit((factorial(m0) * factorial(m1)).sqrt() / norm_in);
                out[(j, i)] += *coeff * scale;
            }
        }
        out
    }
}

/// Mode map sending the `+1` eigenmode of a dichotomic qubit observable to
/// port 0 and the `−1` eigenmode to port 1, for use with [`FockPair::passive`].
pub fn port_map<T: Real>(obs: &Observable<T>) -> Result<[[Complex<T>; 2]; 2]> {
    let plus = obs.qubit_eigenvector(Outcome::Plus)?;
    let minus = obs.qubit_eigenvector(Outcome::Minus)?;
    Ok([[plus[0].conj(), plus[1].conj()], [minus[0].conj(), minus[1].conj()]])
}

fn loss_amp<T: Real>(n: usize, k: usize, eta: T) -> T {
    (T::lit(binom(n, k)) * eta.powi((n - k) as i32) * (T::one() - eta).powi(k as i32)).sqrt()
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::{apply_channel, DensityMatrix, Observable};

    type C = Complex<f64>;

    fn is_tp(ch: &KrausChannel<f64>) -> bool {
        ch.completeness().max_abs_diff(&Matrix::identity(ch.dim())) < 1e-12
    }

    #[test]
    fn basis_order_and_labels() {
        let f = FockPair::new(2);
        assert_eq!(f.dim(), 6);
        assert_eq!(f.labels(["E", "L"]), vec!["vac", "E", "L", "EE", "EL", "LL"]);
    }

    #[test]
    fn maps_are_trace_preserving() {
        let f = FockPair::new(2);
        assert!(is_tp(&f.loss([0.3, 0.8])));
        assert!(is_tp(&f.transfer(1, 0.25)));
        assert!(is_tp(&f.inject(0.1)));
        assert!(is_tp(&f.phase_noise(1, |k| C::new((-(k * k) as f64 * 0.3).exp(), 0.0))));
        let f3 = FockPair::new(3);
        assert!(is_tp(&f3.loss([0.5, 0.5])));
    }

    #[test]
    fn passive_beamsplitter_is_unitary_and_bunches() {
        let f = FockPair::new(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = [[C::new(s, 0.0), C::new(s, 0.0)], [C::new(s, 0.0), C::new(-s, 0.0)]];
        let u = f.passive(w);
        assert!((&u.adjoint() * &u).max_abs_diff(&Matrix::identity(6)) < 1e-12);
        // Hong–Ou–Mandel: |1,1⟩ has no amplitude on |1,1⟩ after a balanced splitter.
        let i11 = f.index(1, 1).unwrap();
        assert!(u[(i11, i11)].norm() < 1e-12);
    }

    #[test]
    fn port_map_routes_eigenmodes() {
        let f = FockPair::new(2);
        let u = f.passive(port_map(&Observable::<f64>::pauli_x()).unwrap());
        // (|E⟩ + |L⟩)/√2 is the +1 eigenmode of X and must exit port 0.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = vec![C::new(0.0, 0.0); 6];
        psi[f.index(1, 0).unwrap()] = C::new(h, 0.0);
        psi[f.index(0, 1).unwrap()] = C::new(h, 0.0);
        let out = u.matvec(&psi);
        assert!((out[f.index(1, 0).unwrap()].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_loss_survival() {
        let f = FockPair::new(2);
        let rho = DensityMatrix::<f64>::basis(6, f.index(1, 0).unwrap());
        let out = apply_channel(&rho, &f.loss([0.22, 0.25])).unwrap();
        assert!((out.population(1) - 0.22).abs() < 1e-12);
        assert!((out.population(0) - 0.78).abs() < 1e-12);
    }
}
