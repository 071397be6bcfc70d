//! Dense complex linear algebra for small quantum systems.
//!
//! Every matrix function goes through a Hermitian eigendecomposition; at the
//! dimensions this crate targets (at most 2^8) exactness matters more than speed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Absolute tolerance for Hermiticity, unit trace and positivity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest supported Hilbert-space dimension.
pub const MAX_DIM: usize = 1 << 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Unitary whose columns are the eigenvectors, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V · diag(f(λ)) · V†`. Non-finite outputs of `f` are domain errors.
    pub fn apply<F>(&self, f: F) -> Result<ComplexMatrix>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut fvals = Vec::with_capacity(self.dim());
        for &lambda in &self.values {
            let v = f(lambda);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Domain { eigenvalue: lambda });
            }
            fvals.push(v);
        }
        Ok(self.assemble(&fvals))
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let vals: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.assemble(&vals)
    }

    fn assemble(&self, diag: &[Complex64]) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &d) in diag.iter().enumerate() {
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= d);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Largest `|m_ij − conj(m_ji)|`.
pub fn max_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::validation("empty matrix"));
    }
    if n > MAX_DIM {
        return Err(Error::Resource(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    Ok(n)
}

/// Hermitian eigendecomposition. Inputs within [`HERMITIAN_TOL`] of Hermitian are
/// symmetrized first; anything further off is rejected.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    let n = check_square(m)?;
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry: asym });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEig { values, vectors })
}

/// `f(m)` for Hermitian `m`, evaluated on the spectrum.
pub fn matrix_function<F>(m: &ComplexMatrix, f: F) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Complex64,
{
    hermitian_eig(m)?.apply(f)
}

/// Hermitian matrix exponential `exp(−i·t·m)`.
pub fn unitary_evolution(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    matrix_function(m, |lambda| Complex64::from_polar(1.0, -lambda * t))
}

/// Spectral norm (largest singular value) of an arbitrary square matrix.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let eig = SymmetricEigen::new((&gram + gram.adjoint()).scale(0.5));
    eig.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v)).sqrt()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Which factor of a bipartite system to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateVector {
    amplitudes: DVector<Complex64>,
}

impl PureStateVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::validation("empty state vector"));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::validation(format!("state vector norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_vec(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::new(DVector::from_vec(amplitudes))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::validation(format!("basis index {index} >= dim {dim}")));
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// `⟨ψ|m|ψ⟩`.
    pub fn expectation(&self, m: &ComplexMatrix) -> Result<Complex64> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(self.amplitudes.dotc(&(m * &self.amplitudes)))
    }

    /// Amplitudes reshaped as a `dim_a × dim_b` matrix, `Ψ[a, b] = ψ[a·dim_b + b]`.
    pub fn as_bipartite(&self, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
        if dim_a * dim_b != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim_a * dim_b,
            });
        }
        Ok(ComplexMatrix::from_fn(dim_a, dim_b, |a, b| self.amplitudes[a * dim_b + b]))
    }

    /// Inverse of [`as_bipartite`](Self::as_bipartite).
    pub fn from_bipartite(psi: &ComplexMatrix) -> Result<Self> {
        let (da, db) = psi.shape();
        let amps = DVector::from_fn(da * db, |k, _| psi[(k / db, k % db)]);
        Self::new(amps)
    }
}

/// Hermitian, unit-trace, positive semidefinite operator with its spectrum cached.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    eig: HermitianEig,
}

impl DensityMatrix {
    /// Validates `mat`. Eigenvalues in `[−1e−10, 0)` are clamped to zero and the
    /// spectrum renormalized; larger violations are errors.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let eig = hermitian_eig(&mat)?;
        let tr: f64 = eig.values.iter().sum();
        if (tr - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr} is not 1")));
        }
        let min = eig.values[0];
        if min < -HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        if min < 0.0 {
            let mut values: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = values.iter().sum();
            values.iter_mut().for_each(|v| *v /= total);
            let eig = HermitianEig {
                values,
                vectors: eig.vectors,
            };
            return Ok(Self {
                mat: eig.reconstruct(),
                eig,
            });
        }
        let mat = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self { mat, eig })
    }

    pub fn from_pure(psi: &PureStateVector) -> Result<Self> {
        let v = psi.amplitudes();
        Self::new(v * v.adjoint())
    }

    /// `diag(probs)`; probabilities must be non-negative and sum to one.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &p) in probs.iter().enumerate() {
            m[(i, i)] = Complex64::new(p, 0.0);
        }
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn eig(&self) -> &HermitianEig {
        &self.eig
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn purity(&self) -> f64 {
        self.eig.values.iter().map(|p| p * p).sum()
    }

    /// `Re Tr(ρ m)`.
    pub fn expectation(&self, m: &ComplexMatrix) -> Result<f64> {
        if m.shape() != self.mat.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        // Tr(ρ m) = Σ_ij ρ_ij m_ji
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.mat[(i, j)] * m[(j, i)];
            }
        }
        Ok(acc.re)
    }
}

fn check_bipartite(dim: usize, dim_a: usize, dim_b: usize) -> Result<()> {
    if dim_a == 0 || dim_b == 0 || dim_a * dim_b != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: dim_a * dim_b,
        });
    }
    Ok(())
}

/// Reduced state of a bipartite density matrix on `A ⊗ B`.
pub fn partial_trace(
    rho: &DensityMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<DensityMatrix> {
    check_bipartite(rho.dim(), dim_a, dim_b)?;
    let m = rho.matrix();
    let reduced = match keep {
        Subsystem::A => ComplexMatrix::from_fn(dim_a, dim_a, |i, k| {
            (0..dim_b).map(|b| m[(i * dim_b + b, k * dim_b + b)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(dim_b, dim_b, |i, k| {
            (0..dim_a).map(|a| m[(a * dim_b + i, a * dim_b + k)]).sum()
        }),
    };
    DensityMatrix::new(reduced)
}

/// Reduced state of a bipartite pure state, without forming `|ψ⟩⟨ψ|`.
pub fn partial_trace_pure(
    psi: &PureStateVector,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<DensityMatrix> {
    check_bipartite(psi.dim(), dim_a, dim_b)?;
    let m = psi.as_bipartite(dim_a, dim_b)?;
    let reduced = match keep {
        Subsystem::A => &m * m.adjoint(),
        Subsystem::B => m.transpose() * m.conjugate(),
    };
    DensityMatrix::new(reduced)
}

/// `½ Σ |λ_i(a − b)|`, clamped to `[0, 1]`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = a.matrix() - b.matrix();
    let eig = hermitian_eig(&diff)?;
    let d = 0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase fix on `R`'s diagonal.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// Random Hermitian matrix with i.i.d. Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    (&g + g.adjoint()).scale(0.5)
}

/// `U · diag(spectrum) · U†` for a Haar-random `U`.
pub fn random_density_matrix<R: Rng + ?Sized>(spectrum: &[f64], rng: &mut R) -> Result<DensityMatrix> {
    let u = random_unitary(spectrum.len(), rng);
    let mut d = ComplexMatrix::zeros(spectrum.len(), spectrum.len());
    for (i, &p) in spectrum.iter().enumerate() {
        d[(i, i)] = Complex64::new(p, 0.0);
    }
    DensityMatrix::new(&u * d * u.adjoint())
}

/// Spectrum of length `dim` with every entry in `[p_min, 1]`, summing to one.
pub fn random_spectrum<R: Rng + ?Sized>(dim: usize, p_min: f64, rng: &mut R) -> Result<Vec<f64>> {
    let slack = 1.0 - dim as f64 * p_min;
    if dim == 0 || !(0.0..=1.0).contains(&p_min) || slack < 0.0 {
        return Err(Error::validation(format!(
            "no spectrum of length {dim} has all entries >= {p_min}"
        )));
    }
    // Flat Dirichlet weights from normalized exponentials.
    let w: Vec<f64> = (0..dim)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|x| p_min + slack * x / total).collect())
}
