//! Pauli-sum Hamiltonians, their LCU form, the interpolating family
//! `H′(s) = H0 + s·H1`, random transverse-field instances and exact Gibbs states.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ComplexMatrix, DensityMatrix};

/// Largest qubit count for which dense matrices are built.
pub const MAX_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::validation(format!("unknown Pauli letter {other:?}"))),
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis. Qubit 0 is the leftmost letter and the
/// most significant bit of a basis index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::validation("Pauli string needs at least one qubit"));
        }
        Ok(Self { letters })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n])
    }

    /// `letter` on each qubit in `sites`, identity elsewhere.
    pub fn on_sites(n: usize, sites: &[usize], letter: Pauli) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &j in sites {
            if j >= n {
                return Err(Error::validation(format!("site {j} out of range for {n} qubits")));
            }
            letters[j] = letter;
        }
        Self::new(letters)
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Dense `2^n × 2^n` matrix.
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        check_qubits(self.n())?;
        let n = self.n();
        let dim = 1usize << n;
        let (flip, phase_z, ny) = self.masks();
        // P|b⟩ = i^{#Y} (−1)^{popcount(b & z)} |b ⊕ flip⟩, with z marking Y and Z.
        let base = Complex64::i().powu(ny);
        let mut m = ComplexMatrix::zeros(dim, dim);
        for b in 0..dim {
            let sign = if (b & phase_z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(b ^ flip, b)] = base * sign;
        }
        Ok(m)
    }

    fn masks(&self) -> (usize, usize, u32) {
        let n = self.n();
        let (mut flip, mut z, mut ny) = (0usize, 0usize, 0u32);
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    z |= bit;
                    ny += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        (flip, z, ny)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.letters.iter().try_for_each(|p| write!(f, "{}", p.as_char()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.chars().map(Pauli::from_char).collect::<Result<_>>()?)
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the dense limit of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TermRepr {
    coeff: f64,
    letters: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PauliSumRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

/// Real linear combination of Pauli strings on `n` qubits, duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PauliSumRepr", into = "PauliSumRepr")]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    /// Merges repeated strings, keeping first-appearance order.
    pub fn new(n: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("Pauli sum needs at least one qubit"));
        }
        let mut merged: Vec<(f64, PauliString)> = Vec::with_capacity(terms.len());
        let mut index: BTreeMap<PauliString, usize> = BTreeMap::new();
        for (c, s) in terms {
            if !c.is_finite() {
                return Err(Error::validation(format!("non-finite coefficient {c} on {s}")));
            }
            if s.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.n(),
                });
            }
            match index.get(&s) {
                Some(&i) => merged[i].0 += c,
                None => {
                    index.insert(s.clone(), merged.len());
                    merged.push((c, s));
                }
            }
        }
        Ok(Self { n, terms: merged })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Coefficient of `s`, zero if absent.
    pub fn coeff(&self, s: &PauliString) -> f64 {
        self.terms.iter().find(|(_, t)| t == s).map_or(0.0, |(c, _)| *c)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(c, s)| (c * k, s.clone())).collect(),
        }
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Self::new(self.n, self.terms.iter().chain(other.terms.iter()).cloned().collect())
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        check_qubits(self.n)?;
        let dim = self.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (c, s) in &self.terms {
            m += s.to_matrix()?.scale(*c);
        }
        Ok(m)
    }
}

impl TryFrom<PauliSumRepr> for PauliSum {
    type Error = Error;

    fn try_from(r: PauliSumRepr) -> Result<Self> {
        let terms = r
            .terms
            .into_iter()
            .map(|t| Ok((t.coeff, t.letters.parse()?)))
            .collect::<Result<Vec<_>>>()?;
        PauliSum::new(r.n, terms)
    }
}

impl From<PauliSum> for PauliSumRepr {
    fn from(h: PauliSum) -> Self {
        PauliSumRepr {
            n: h.n,
            terms: h
                .terms
                .into_iter()
                .map(|(coeff, s)| TermRepr {
                    coeff,
                    letters: s.to_string(),
                })
                .collect(),
        }
    }
}

/// `H = Σ α_k V_k` with `α_k > 0` and unitary `V_k`.
#[derive(Debug, Clone)]
pub struct LcuDecomposition {
    pub alphas: Vec<f64>,
    pub unitaries: Vec<ComplexMatrix>,
    pub alpha_norm: f64,
}

impl LcuDecomposition {
    pub fn dim(&self) -> usize {
        self.unitaries.first().map_or(0, |u| u.nrows())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let dim = self.dim();
        self.alphas
            .iter()
            .zip(&self.unitaries)
            .fold(ComplexMatrix::zeros(dim, dim), |acc, (a, v)| acc + v.scale(*a))
    }
}

/// `α_k = |c_k|`, `V_k = sign(c_k)·P_k`. Zero-coefficient terms are dropped.
pub fn lcu_decompose(h: &PauliSum) -> Result<LcuDecomposition> {
    let mut alphas = Vec::new();
    let mut unitaries = Vec::new();
    for (c, s) in h.terms() {
        if *c == 0.0 {
            continue;
        }
        alphas.push(c.abs());
        unitaries.push(s.to_matrix()?.scale(c.signum()));
    }
    if alphas.is_empty() {
        return Err(Error::validation("cannot decompose the zero Hamiltonian"));
    }
    let alpha_norm = alphas.iter().sum();
    Ok(LcuDecomposition {
        alphas,
        unitaries,
        alpha_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticFamily {
    pub h0: PauliSum,
    pub h1: PauliSum,
}

impl AdiabaticFamily {
    pub fn new(h0: PauliSum, h1: PauliSum) -> Result<Self> {
        if h0.n() != h1.n() {
            return Err(Error::DimensionMismatch {
                expected: h0.n(),
                found: h1.n(),
            });
        }
        Ok(Self { h0, h1 })
    }

    pub fn n(&self) -> usize {
        self.h0.n()
    }

    /// The target Hamiltonian `H′(1)`.
    pub fn target(&self) -> PauliSum {
        self.interpolate(1.0)
    }

    /// `H0 + s·H1`, term-wise.
    pub fn interpolate(&self, s: f64) -> PauliSum {
        self.h0
            .add(&self.h1.scaled(s))
            .expect("family members share a qubit count")
    }
}

/// Which qubit pairs carry a `ZZ` coupling in [`random_instance`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    AllPairs,
    Chain,
}

impl Coupling {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Coupling::AllPairs => (0..n)
                .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
                .collect(),
            Coupling::Chain => (1..n).map(|j| (j - 1, j)).collect(),
        }
    }
}

/// `H0 = Σ a_j Z_j`, `H1 = Σ b_j X_j + Σ c_jk Z_j Z_k` with every coefficient
/// uniform on `[−1, 1]`, drawn in the order `a`, `b`, `c`.
pub fn random_instance(n: usize, seed: u64, coupling: Coupling) -> Result<AdiabaticFamily> {
    if n == 0 {
        return Err(Error::validation("instance needs at least one qubit"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || rng.random_range(-1.0..=1.0);
    let mut h0 = Vec::with_capacity(n);
    for j in 0..n {
        h0.push((draw(), PauliString::on_sites(n, &[j], Pauli::Z)?));
    }
    let mut h1 = Vec::new();
    for j in 0..n {
        h1.push((draw(), PauliString::on_sites(n, &[j], Pauli::X)?));
    }
    for (j, k) in coupling.pairs(n) {
        h1.push((draw(), PauliString::on_sites(n, &[j, k], Pauli::Z)?));
    }
    AdiabaticFamily::new(PauliSum::new(n, h0)?, PauliSum::new(n, h1)?)
}

/// `e^{−βH} / Tr e^{−βH}`.
pub fn gibbs_state(h: &PauliSum, beta: f64) -> Result<DensityMatrix> {
    gibbs_state_of_matrix(&h.to_matrix()?, beta)
}

pub fn gibbs_state_of_matrix(h: &ComplexMatrix, beta: f64) -> Result<DensityMatrix> {
    check_beta(beta)?;
    let eig = hermitian_eig(h)?;
    let weights = boltzmann_weights(&eig.values, beta);
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let mut shifted = eig.clone();
    shifted.values = probs;
    DensityMatrix::new(shifted.reconstruct())
}

/// `−β⁻¹ ln Z`, the free energy of the Gibbs state. Requires `β > 0`.
pub fn gibbs_free_energy(h: &PauliSum, beta: f64) -> Result<f64> {
    gibbs_free_energy_of_matrix(&h.to_matrix()?, beta)
}

pub fn gibbs_free_energy_of_matrix(h: &ComplexMatrix, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Err(Error::validation("free energy needs beta > 0"));
    }
    let eig = hermitian_eig(h)?;
    let e0 = eig.values[0];
    let z_shifted: f64 = boltzmann_weights(&eig.values, beta).iter().sum();
    Ok(e0 - z_shifted.ln() / beta)
}

/// `e^{−β(E − E_min)}`, shifted so the largest weight is one.
fn boltzmann_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    energies.iter().map(|e| (-beta * (e - e0)).exp()).collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::validation(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{max_asymmetry, spectral_norm};
    use approx::assert_abs_diff_eq;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_qubit_paulis() {
        let x = ps("X").to_matrix().unwrap();
        let y = ps("Y").to_matrix().unwrap();
        let z = ps("Z").to_matrix().unwrap();
        assert_eq!(x, ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        assert_eq!(y, ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]));
        assert_eq!(z, ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]));
    }

    #[test]
    fn strings_match_kronecker_products() {
        use crate::numkernel::kron;
        let mats: Vec<ComplexMatrix> = ["X", "Y", "Z"].iter().map(|s| ps(s).to_matrix().unwrap()).collect();
        let xyz = kron(&kron(&mats[0], &mats[1]), &mats[2]);
        assert_abs_diff_eq!(max_diff(&ps("XYZ").to_matrix().unwrap(), &xyz), 0.0);
    }

    #[test]
    fn to_matrix_examples() {
        let h = PauliSum::new(1, vec![(1.0, ps("Z"))]).unwrap();
        let m = h.to_matrix().unwrap();
        assert_eq!(m[(0, 0)].re, 1.0);
        assert_eq!(m[(1, 1)].re, -1.0);
        let h = PauliSum::new(2, vec![(0.5, ps("ZZ"))]).unwrap();
        let m = h.to_matrix().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(diag, vec![0.5, -0.5, -0.5, 0.5]);
    }

    #[test]
    fn to_matrix_rejects_large_n() {
        let h = PauliSum::new(9, vec![(1.0, PauliString::identity(9).unwrap())]).unwrap();
        assert!(matches!(h.to_matrix(), Err(Error::Resource(_))));
    }

    #[test]
    fn random_sum_is_hermitian() {
        let h = PauliSum::new(
            3,
            vec![(0.3, ps("XYZ")), (-1.2, ps("YYI")), (0.7, ps("ZIX")), (0.1, ps("YII"))],
        )
        .unwrap();
        let m = h.to_matrix().unwrap();
        assert!(max_asymmetry(&m) <= 1e-12);
    }

    #[test]
    fn duplicates_merge() {
        let h = PauliSum::new(1, vec![(1.0, ps("Z")), (0.5, ps("X")), (2.0, ps("Z"))]).unwrap();
        assert_eq!(h.terms().len(), 2);
        assert_eq!(h.coeff(&ps("Z")), 3.0);
    }

    #[test]
    fn construction_checks() {
        assert!(PauliSum::new(2, vec![(1.0, ps("Z"))]).is_err());
        assert!(PauliSum::new(1, vec![(f64::NAN, ps("Z"))]).is_err());
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn lcu_examples() {
        let lcu = lcu_decompose(&PauliSum::new(1, vec![(1.0, ps("Z"))]).unwrap()).unwrap();
        assert_eq!(lcu.alphas, vec![1.0]);
        assert_eq!(lcu.unitaries[0], ps("Z").to_matrix().unwrap());

        let lcu = lcu_decompose(&PauliSum::new(1, vec![(-0.5, ps("X"))]).unwrap()).unwrap();
        assert_eq!(lcu.alphas, vec![0.5]);
        assert_eq!(lcu.unitaries[0], -ps("X").to_matrix().unwrap());
        let v = &lcu.unitaries[0];
        assert_abs_diff_eq!(max_diff(&(v * v.adjoint()), &ComplexMatrix::identity(2, 2)), 0.0);
    }

    #[test]
    fn lcu_reconstructs_random_instance() {
        let h = random_instance(4, 3, Coupling::AllPairs).unwrap().target();
        let lcu = lcu_decompose(&h).unwrap();
        let m = h.to_matrix().unwrap();
        assert!(max_diff(&lcu.reconstruct(), &m) <= 1e-12);
        assert!(lcu.alpha_norm >= spectral_norm(&m) - 1e-12);
    }

    #[test]
    fn lcu_rejects_zero() {
        assert!(lcu_decompose(&PauliSum::zero(2).unwrap()).is_err());
        let h = PauliSum::new(1, vec![(0.0, ps("X"))]).unwrap();
        assert!(lcu_decompose(&h).is_err());
    }

    #[test]
    fn interpolate_examples() {
        let f = AdiabaticFamily::new(
            PauliSum::new(1, vec![(1.0, ps("Z"))]).unwrap(),
            PauliSum::new(1, vec![(1.0, ps("X"))]).unwrap(),
        )
        .unwrap();
        let h = f.interpolate(0.0);
        assert_eq!(h.coeff(&ps("Z")), 1.0);
        assert_eq!(h.coeff(&ps("X")), 0.0);
        let h = f.interpolate(0.5);
        assert_eq!(h.coeff(&ps("Z")), 1.0);
        assert_eq!(h.coeff(&ps("X")), 0.5);
        let h = f.target();
        assert_eq!(h.to_matrix().unwrap(), f.h0.add(&f.h1).unwrap().to_matrix().unwrap());
    }

    #[test]
    fn random_instance_shape() {
        let a = random_instance(3, 11, Coupling::AllPairs).unwrap();
        let b = random_instance(3, 11, Coupling::AllPairs).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_instance(3, 12, Coupling::AllPairs).unwrap());
        let zz = |f: &AdiabaticFamily| {
            f.h1.terms()
                .iter()
                .filter(|(_, s)| s.letters().iter().filter(|&&p| p == Pauli::Z).count() == 2)
                .count()
        };
        assert_eq!(zz(&a), 3);
        assert_eq!(zz(&random_instance(1, 0, Coupling::AllPairs).unwrap()), 0);
        assert_eq!(zz(&random_instance(4, 0, Coupling::Chain).unwrap()), 3);
        assert_eq!(zz(&random_instance(4, 0, Coupling::AllPairs).unwrap()), 6);
        for f in [&a] {
            for (c, _) in f.h0.terms().iter().chain(f.h1.terms()) {
                assert!((-1.0..=1.0).contains(c));
            }
        }
    }

    #[test]
    fn gibbs_examples() {
        let h = random_instance(2, 5, Coupling::AllPairs).unwrap().target();
        let g = gibbs_state(&h, 0.0).unwrap();
        assert!(max_diff(g.matrix(), &ComplexMatrix::identity(4, 4).scale(0.25)) <= 1e-14);

        let z = PauliSum::new(1, vec![(1.0, ps("Z"))]).unwrap();
        let g = gibbs_state(&z, 1.0).unwrap();
        let norm = 2.0 * 1f64.cosh();
        assert_abs_diff_eq!(g.matrix()[(0, 0)].re, (-1f64).exp() / norm, epsilon = 1e-14);
        assert_abs_diff_eq!(g.matrix()[(1, 1)].re, 1f64.exp() / norm, epsilon = 1e-14);
        assert_abs_diff_eq!(g.matrix()[(0, 0)].re, 0.11920, epsilon = 1e-5);
        assert_abs_diff_eq!(g.matrix()[(1, 1)].re, 0.88080, epsilon = 1e-5);
    }

    #[test]
    fn commuting_gibbs_is_diagonal() {
        let h = PauliSum::new(2, vec![(0.4, ps("ZI")), (-0.9, ps("IZ")), (0.3, ps("ZZ"))]).unwrap();
        let g = gibbs_state(&h, 1.7).unwrap();
        let m = h.to_matrix().unwrap();
        let w: Vec<f64> = (0..4).map(|i| (-1.7 * m[(i, i)].re).exp()).collect();
        let z: f64 = w.iter().sum();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { w[i] / z } else { 0.0 };
                assert_abs_diff_eq!(g.matrix()[(i, j)].re, expected, epsilon = 1e-13);
                assert_abs_diff_eq!(g.matrix()[(i, j)].im, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gibbs_free_energy_scalar() {
        let z = PauliSum::new(1, vec![(1.0, ps("Z"))]).unwrap();
        let f = gibbs_free_energy(&z, 2.0).unwrap();
        assert_abs_diff_eq!(f, -(2.0 * 2f64.cosh()).ln() / 2.0, epsilon = 1e-14);
        assert!(gibbs_free_energy(&z, 0.0).is_err());
        assert!(gibbs_state(&z, -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = random_instance(3, 1, Coupling::AllPairs).unwrap();
        let json = serde_json::to_string(&f.h1).unwrap();
        assert!(json.contains("\"letters\":\"XII\""));
        let back: PauliSum = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f.h1);
        assert!(serde_json::from_str::<PauliSum>(r#"{"n":2,"terms":[{"coeff":1.0,"letters":"Z"}]}"#).is_err());
    }
}
