//! Density matrices, observables and Kraus channels.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;

use super::matrix::Matrix;
use crate::error::{QuantumError, Result};
use crate::scalar::Real;

/// Normalized mixed state together with the probability weight of the branch it describes.
///
/// Lossy channels do not renormalize silently: the state stays trace one and
/// the survival probability accumulates in `weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: Matrix<T>,
    labels: Vec<String>,
    weight: T,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity and positivity, normalizes the trace, and records
    /// the original trace in `weight`.
    pub fn new(matrix: Matrix<T>, labels: Vec<String>) -> Result<Self> {
        let state = Self::new_unchecked(matrix, labels)?;
        state.validate()?;
        Ok(state)
    }

    /// Normalizes without the (cubic-cost) eigenvalue check. Hermiticity is still enforced.
    pub fn new_unchecked(matrix: Matrix<T>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.dim() {
            return Err(QuantumError::DimensionMismatch {
                expected: matrix.dim(),
                found: labels.len(),
            });
        }
        let residual = matrix.hermiticity_residual();
        let scale = matrix.as_slice().iter().map(|z| z.norm()).fold(T::one(), T::max);
        if residual > T::exact_tol() * scale {
            return Err(QuantumError::NotHermitian {
                residual: residual.as_f64(),
            });
        }
        let trace = matrix.trace().re;
        if trace <= T::zero() {
            return Err(QuantumError::ZeroTrace { trace: trace.as_f64() });
        }
        Ok(Self {
            matrix: matrix.scale_real(T::one() / trace),
            labels,
            weight: trace,
        })
    }

    pub fn from_pure(psi: &[Complex<T>], labels: Vec<String>) -> Result<Self> {
        Self::new_unchecked(Matrix::outer(psi), labels)
    }

    /// Computational-basis state `|index⟩⟨index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        m[(index, index)] = Complex::one();
        Self {
            matrix: m,
            labels: (0..dim).map(|i| i.to_string()).collect(),
            weight: T::one(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim).scale_real(T::one() / T::lit(dim as f64)),
            labels: (0..dim).map(|i| i.to_string()).collect(),
            weight: T::one(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(QuantumError::DimensionMismatch {
                expected: self.dim(),
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_weight(mut self, weight: T) -> Self {
        self.weight = weight;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn purity(&self) -> T {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Overlap `⟨ψ|ρ|ψ⟩` with a normalized pure target.
    pub fn fidelity_with_pure(&self, psi: &[Complex<T>]) -> Result<T> {
        check_dim(self.dim(), psi.len())?;
        let rho_psi = self.matrix.matvec(psi);
        Ok(psi
            .iter()
            .zip(&rho_psi)
            .fold(Complex::zero(), |acc: Complex<T>, (a, b)| acc + a.conj() * *b)
            .re)
    }

    /// Population of basis index `i`.
    pub fn population(&self, i: usize) -> T {
        self.matrix[(i, i)].re
    }

    /// Checks the three state invariants: Hermitian, unit trace, eigenvalues ≥ −tol.
    pub fn validate(&self) -> Result<()> {
        let residual = self.matrix.hermiticity_residual();
        if residual > T::exact_tol() {
            return Err(QuantumError::NotHermitian {
                residual: residual.as_f64(),
            });
        }
        let trace = self.matrix.trace().re;
        if (trace - T::one()).abs() > T::exact_tol() {
            return Err(QuantumError::ZeroTrace { trace: trace.as_f64() });
        }
        let min_eig = self.matrix.min_hermitian_eigenvalue();
        if min_eig < -T::accum_tol() {
            return Err(QuantumError::NotPositive {
                min_eigenvalue: min_eig.as_f64(),
            });
        }
        Ok(())
    }

    /// Project onto a subspace (list of basis indices). Returns `None` when the
    /// projected weight vanishes; otherwise the normalized conditional state,
    /// with `weight` multiplied by the conditional probability.
    pub fn post_select(&self, keep: impl Fn(usize) -> bool) -> Option<Self> {
        let n = self.dim();
        let m = Matrix::from_fn(n, |r, c| {
            if keep(r) && keep(c) {
                self.matrix[(r, c)]
            } else {
                Complex::zero()
            }
        });
        let p = m.trace().re;
        if p <= T::zero() {
            return None;
        }
        Some(Self {
            matrix: m.scale_real(T::one() / p),
            labels: self.labels.clone(),
            weight: self.weight * p,
        })
    }
}

/// Hermitian observable with a display name.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable<T: Real> {
    matrix: Matrix<T>,
    name: String,
}

impl<T: Real> Observable<T> {
    pub fn new(matrix: Matrix<T>, name: impl Into<String>) -> Result<Self> {
        let residual = matrix.hermiticity_residual();
        if residual > T::exact_tol() {
            return Err(QuantumError::NotHermitian {
                residual: residual.as_f64(),
            });
        }
        Ok(Self {
            matrix,
            name: name.into(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim),
            name: "I".into(),
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            matrix: Matrix::from_real_rows(&[0.0, 1.0, 1.0, 0.0]),
            name: "X".into(),
        }
    }

    pub fn pauli_y() -> Self {
        let z = Complex::zero();
        let i = Complex::new(T::zero(), T::one());
        Self {
            matrix: Matrix::from_rows(vec![z, -i, i, z]),
            name: "Y".into(),
        }
    }

    pub fn pauli_z() -> Self {
        Self {
            matrix: Matrix::from_real_rows(&[1.0, 0.0, 0.0, -1.0]),
            name: "Z".into(),
        }
    }

    /// Real linear combination `Σ c_i O_i` of same-dimension observables.
    pub fn combine(terms: &[(T, &Observable<T>)], name: impl Into<String>) -> Result<Self> {
        let dim = terms.first().map(|t| t.1.dim()).unwrap_or(0);
        let mut acc = Matrix::zeros(dim);
        for (c, o) in terms {
            check_dim(dim, o.dim())?;
            acc = &acc + &o.matrix.scale_real(*c);
        }
        Self::new(acc, name)
    }

    pub fn negated(&self) -> Self {
        Self {
            matrix: self.matrix.scale_real(-T::one()),
            name: format!("-{}", self.name),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `Ok` when `O² = I` within the accumulated tolerance.
    pub fn check_dichotomic(&self) -> Result<()> {
        let sq = &self.matrix * &self.matrix;
        let residual = sq.max_abs_diff(&Matrix::identity(self.dim()));
        if residual > T::accum_tol() {
            return Err(QuantumError::NotDichotomic {
                name: self.name.clone(),
                residual: residual.as_f64(),
            });
        }
        Ok(())
    }

    /// Eigenprojector `(I ± O)/2` of a dichotomic observable.
    pub fn projector(&self, outcome: Outcome) -> Matrix<T> {
        let half = T::lit(0.5);
        let id = Matrix::identity(self.dim());
        match outcome {
            Outcome::Plus => (&id + &self.matrix).scale_real(half),
            Outcome::Minus => (&id - &self.matrix).scale_real(half),
        }
    }

    /// Normalized eigenvector for the given outcome of a dichotomic qubit observable.
    pub fn qubit_eigenvector(&self, outcome: Outcome) -> Result<[Complex<T>; 2]> {
        check_dim(2, self.dim())?;
        self.check_dichotomic()?;
        let p = self.projector(outcome);
        // Rank-one projector: any nonzero column is proportional to the eigenvector.
        let col = if p[(0, 0)].re >= p[(1, 1)].re { 0 } else { 1 };
        let v = [p[(0, col)], p[(1, col)]];
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        Ok([v[0] / norm, v[1] / norm])
    }
}

/// Outcome of a dichotomic measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Set of Kraus operators `{K_i}` acting as `ρ ↦ Σ K_i ρ K_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel<T: Real> {
    operators: Vec<Matrix<T>>,
    trace_preserving: bool,
}

impl<T: Real> KrausChannel<T> {
    /// Validates completeness: `Σ K†K = I` when trace preserving, `≤ I` otherwise.
    pub fn new(operators: Vec<Matrix<T>>, trace_preserving: bool) -> Result<Self> {
        let dim = operators
            .first()
            .map(Matrix::dim)
            .ok_or_else(|| QuantumError::InvalidParameter("empty Kraus set".into()))?;
        for op in &operators {
            check_dim(dim, op.dim())?;
        }
        let ch = Self {
            operators,
            trace_preserving,
        };
        let completeness = ch.completeness();
        let id = Matrix::identity(dim);
        if trace_preserving {
            let residual = completeness.max_abs_diff(&id);
            if residual > T::accum_tol() {
                return Err(QuantumError::InvalidChannel {
                    residual: residual.as_f64(),
                });
            }
        } else {
            let min_eig = (&id - &completeness).min_hermitian_eigenvalue();
            if min_eig < -T::accum_tol() {
                return Err(QuantumError::InvalidChannel {
                    residual: (-min_eig).as_f64(),
                });
            }
        }
        Ok(ch)
    }

    /// Construct without the completeness check; used for operator sets whose
    /// completeness holds by construction and is covered by tests.
    pub(crate) fn from_parts(operators: Vec<Matrix<T>>, trace_preserving: bool) -> Self {
        Self {
            operators,
            trace_preserving,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(vec![Matrix::identity(dim)], true)
    }

    pub fn unitary(u: Matrix<T>) -> Result<Self> {
        Self::new(vec![u], true)
    }

    pub fn operators(&self) -> &[Matrix<T>] {
        &self.operators
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    /// `Σ K†K`.
    pub fn completeness(&self) -> Matrix<T> {
        self.operators
            .iter()
            .fold(Matrix::zeros(self.dim()), |acc, k| &acc + &(&k.adjoint() * k))
    }

    /// Channel equal to applying `self` then `next`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        check_dim(self.dim(), next.dim())?;
        let mut ops = Vec::with_capacity(self.operators.len() * next.operators.len());
        for b in &next.operators {
            for a in &self.operators {
                ops.push(b * a);
            }
        }
        Ok(Self::from_parts(ops, self.trace_preserving && next.trace_preserving))
    }

    /// Lift to a larger space: `self ⊗ I_after` or `I_before ⊗ self`.
    pub fn embed_left(&self, after_dim: usize) -> Self {
        let id = Matrix::identity(after_dim);
        Self::from_parts(self.operators.iter().map(|k| k.kron(&id)).collect(), self.trace_preserving)
    }

    pub fn embed_right(&self, before_dim: usize) -> Self {
        let id = Matrix::identity(before_dim);
        Self::from_parts(self.operators.iter().map(|k| id.kron(k)).collect(), self.trace_preserving)
    }

    /// Unnormalized image `Σ K ρ K†` of a bare matrix.
    pub fn apply_matrix(&self, rho: &Matrix<T>) -> Matrix<T> {
        self.operators
            .iter()
            .fold(Matrix::zeros(rho.dim()), |acc, k| &acc + &k.sandwich(rho))
    }
}

/// Kronecker product of two objects of the same kind.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl<T: Real> Tensor for DensityMatrix<T> {
    fn tensor(&self, other: &Self) -> Self {
        let labels = self
            .labels
            .iter()
            .flat_map(|a| other.labels.iter().map(move |b| format!("{a}⊗{b}")))
            .collect();
        Self {
            matrix: self.matrix.kron(&other.matrix),
            labels,
            weight: self.weight * other.weight,
        }
    }
}

impl<T: Real> Tensor for Observable<T> {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kron(&other.matrix),
            name: format!("{}{}", self.name, other.name),
        }
    }
}

impl<T: Real> Tensor for KrausChannel<T> {
    fn tensor(&self, other: &Self) -> Self {
        let mut ops = Vec::with_capacity(self.operators.len() * other.operators.len());
        for a in &self.operators {
            for b in &other.operators {
                ops.push(a.kron(b));
            }
        }
        Self::from_parts(ops, self.trace_preserving && other.trace_preserving)
    }
}

pub fn tensor<K: Tensor>(a: &K, b: &K) -> K {
    a.tensor(b)
}

/// `Σ K ρ K†`. The result is renormalized and the surviving probability is
/// multiplied into `weight`; for trace-preserving channels the weight is unchanged.
pub fn apply_channel<T: Real>(rho: &DensityMatrix<T>, ch: &KrausChannel<T>) -> Result<DensityMatrix<T>> {
    check_dim(rho.dim(), ch.dim())?;
    let out = ch.apply_matrix(&rho.matrix);
    let survival = out.trace().re;
    if survival <= T::zero() {
        return Err(QuantumError::ZeroTrace {
            trace: survival.as_f64(),
        });
    }
    Ok(DensityMatrix {
        matrix: out.scale_real(T::one() / survival),
        labels: rho.labels.clone(),
        weight: rho.weight * survival,
    })
}

/// `Tr(ρO)`; an imaginary part above tolerance signals a non-Hermitian input.
pub fn expectation<T: Real>(rho: &DensityMatrix<T>, obs: &Observable<T>) -> Result<T> {
    check_dim(rho.dim(), obs.dim())?;
    let z = (&rho.matrix * &obs.matrix).trace();
    if z.im.abs() > T::accum_tol() {
        return Err(QuantumError::ImaginaryResidue { residue: z.im.as_f64() });
    }
    Ok(z.re)
}

/// Draw a projective outcome of a dichotomic observable.
pub fn sample_measurement<T: Real, R: Rng + ?Sized>(rho: &DensityMatrix<T>, obs: &Observable<T>, rng: &mut R) -> Result<Outcome> {
    check_dim(rho.dim(), obs.dim())?;
    obs.check_dichotomic()?;
    let p_plus = (&rho.matrix * &obs.projector(Outcome::Plus)).trace().re.as_f64();
    Ok(if rng.random::<f64>() < p_plus {
        Outcome::Plus
    } else {
        Outcome::Minus
    })
}

/// Draw one Kraus branch `k` with probability `Tr(K_k ρ K_k†)` and return the
/// normalized post-branch state. For a non-trace-preserving set the missing
/// probability is an extra "lost" outcome, reported as `None`.
pub fn sample_branch<T: Real, R: Rng + ?Sized>(
    rho: &DensityMatrix<T>,
    ch: &KrausChannel<T>,
    rng: &mut R,
) -> Result<(Option<usize>, DensityMatrix<T>)> {
    check_dim(rho.dim(), ch.dim())?;
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (k, op) in ch.operators.iter().enumerate() {
        let m = op.sandwich(&rho.matrix);
        let p = m.trace().re;
        acc += p;
        if u < acc && p > T::zero() {
            return Ok((
                Some(k),
                DensityMatrix {
                    matrix: m.scale_real(T::one() / p),
                    labels: rho.labels.clone(),
                    weight: rho.weight,
                },
            ));
        }
    }
    Ok((None, rho.clone()))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QuantumError::DimensionMismatch { expected, found });
    }
    Ok(())
}
