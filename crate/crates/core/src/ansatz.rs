//! Trotterized adiabatic ansatz acting on a purification `Σ_j √p_j |j⟩|j⟩`.
//!
//! The system register is the first tensor factor. Path points are
//! `θ_0 = 0 < θ_1..θ_r < θ_{r+1} = 1` (interior points unconstrained), and
//! segment `k` applies `exp(−i H′(s̄_k) Δθ_k T)` with `s̄_k` the segment midpoint.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::AdiabaticFamily;
use crate::numkernel::{
    hermitian_eig, partial_trace_pure, unitary_evolution, ComplexMatrix, DensityMatrix,
    PureStateVector, Subsystem,
};

/// Slack allowed when checking that purification weights are probabilities.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub n: usize,
    /// Number of interior path points.
    pub r: usize,
    pub total_time: f64,
    #[serde(default = "default_substeps")]
    pub segment_substeps: usize,
}

fn default_substeps() -> usize {
    1
}

impl AnsatzConfig {
    pub fn new(n: usize, r: usize, total_time: f64) -> Result<Self> {
        let c = Self {
            n,
            r,
            total_time,
            segment_substeps: 1,
        };
        c.validate()?;
        Ok(c)
    }

    /// Purification rank `D = 2^n`.
    pub fn d(&self) -> usize {
        1 << self.n
    }

    /// Number of optimizer coordinates, `r + D − 1`.
    pub fn num_params(&self) -> usize {
        self.r + self.d() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 8 {
            return Err(Error::validation(format!("n must lie in 1..=8, got {}", self.n)));
        }
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return Err(Error::validation(format!(
                "total_time must be finite and >= 0, got {}",
                self.total_time
            )));
        }
        if self.segment_substeps == 0 {
            return Err(Error::validation("segment_substeps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzParameters {
    pub phi: Vec<f64>,
    /// `p_1..p_{D−1}`; `p_D` is implied by normalization.
    pub probs: Vec<f64>,
}

impl AnsatzParameters {
    /// Splits a flat optimizer vector `[φ_1..φ_r, p_1..p_{D−1}]`.
    pub fn from_flat(x: &[f64], r: usize) -> Result<Self> {
        if x.len() < r {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: x.len(),
            });
        }
        Ok(Self {
            phi: x[..r].to_vec(),
            probs: x[r..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.phi.iter().chain(&self.probs).copied().collect()
    }

    /// `p_D = 1 − Σ p_j`.
    pub fn last_prob(&self) -> f64 {
        1.0 - self.probs.iter().sum::<f64>()
    }

    /// All `D` weights, `p_1..p_D`.
    pub fn full_probs(&self) -> Vec<f64> {
        let mut p = self.probs.clone();
        p.push(self.last_prob());
        p
    }

    fn check_shape(&self, config: &AnsatzConfig) -> Result<()> {
        if self.phi.len() != config.r {
            return Err(Error::DimensionMismatch {
                expected: config.r,
                found: self.phi.len(),
            });
        }
        if self.probs.len() != config.d() - 1 {
            return Err(Error::DimensionMismatch {
                expected: config.d() - 1,
                found: self.probs.len(),
            });
        }
        Ok(())
    }
}

/// `(0, tanh φ_1, .., tanh φ_r, 1)`.
pub fn thetas_from_phis(params: &AnsatzParameters) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(params.phi.iter().map(|p| p.tanh()))
        .chain(std::iter::once(1.0))
        .collect()
}

/// `Σ_j √p_j |j⟩|j⟩` on `D²` amplitudes.
pub fn initial_purification(params: &AnsatzParameters, d: usize) -> Result<PureStateVector> {
    if params.probs.len() + 1 != d {
        return Err(Error::DimensionMismatch {
            expected: d - 1,
            found: params.probs.len(),
        });
    }
    let probs = params.full_probs();
    if let Some((j, p)) = probs.iter().enumerate().find(|(_, &p)| !(p >= -PROB_TOL)) {
        return Err(Error::InfeasibleParameters(format!("p_{} = {p} is negative", j + 1)));
    }
    let mut psi = ComplexMatrix::zeros(d, d);
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (j, p) in probs.iter().enumerate() {
        psi[(j, j)] = Complex64::new((p.max(0.0) / total).sqrt(), 0.0);
    }
    PureStateVector::from_bipartite(&psi)
}

/// Clamps each `p_j` to `[0, 1]`, then rescales if `Σ p_j > 1`. Returns the
/// projected parameters and the squared distance moved.
pub fn feasibility_projection(params: &AnsatzParameters) -> (AnsatzParameters, f64) {
    let mut probs: Vec<f64> = params.probs.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let sum: f64 = probs.iter().sum();
    if sum > 1.0 {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    let violation = params
        .probs
        .iter()
        .zip(&probs)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    (
        AnsatzParameters {
            phi: params.phi.clone(),
            probs,
        },
        violation,
    )
}

/// Dense matrices of one family, reused across evaluations.
#[derive(Debug, Clone)]
pub struct AnsatzCircuit {
    config: AnsatzConfig,
    h0: ComplexMatrix,
    h1: ComplexMatrix,
}

impl AnsatzCircuit {
    pub fn new(family: &AdiabaticFamily, config: AnsatzConfig) -> Result<Self> {
        config.validate()?;
        if family.n() != config.n {
            return Err(Error::DimensionMismatch {
                expected: config.n,
                found: family.n(),
            });
        }
        Ok(Self {
            h0: family.h0.to_matrix()?,
            h1: family.h1.to_matrix()?,
            config,
        })
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    /// System-register unitary of the whole path.
    pub fn path_unitary(&self, params: &AnsatzParameters) -> Result<ComplexMatrix> {
        params.check_shape(&self.config)?;
        let thetas = thetas_from_phis(params);
        let d = self.config.d();
        let mut u = ComplexMatrix::identity(d, d);
        for w in thetas.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let dt = (w[1] - w[0]) * self.config.total_time;
            u = self.segment(mid, dt)? * u;
        }
        Ok(u)
    }

    fn segment(&self, s: f64, dt: f64) -> Result<ComplexMatrix> {
        let steps = self.config.segment_substeps;
        if steps == 1 {
            let h = &self.h0 + self.h1.scale(s);
            return unitary_evolution(&h, dt);
        }
        let h = dt / steps as f64;
        let step = unitary_evolution(&self.h1, s * h)? * unitary_evolution(&self.h0, h)?;
        let mut u = step.clone();
        for _ in 1..steps {
            u = &step * u;
        }
        Ok(u)
    }

    /// `(U ⊗ I)` applied to the purification.
    pub fn evolve(&self, params: &AnsatzParameters) -> Result<PureStateVector> {
        let d = self.config.d();
        let psi0 = initial_purification(params, d)?;
        let u = self.path_unitary(params)?;
        PureStateVector::from_bipartite(&(u * psi0.as_bipartite(d, d)?))
    }

    /// System reduced state after evolution.
    pub fn reduced_state(&self, params: &AnsatzParameters) -> Result<DensityMatrix> {
        reduced_state(&self.evolve(params)?, self.config.d())
    }
}

pub fn evolve(
    params: &AnsatzParameters,
    family: &AdiabaticFamily,
    config: &AnsatzConfig,
) -> Result<PureStateVector> {
    AnsatzCircuit::new(family, config.clone())?.evolve(params)
}

/// Traces out the ancilla register.
pub fn reduced_state(psi: &PureStateVector, d: usize) -> Result<DensityMatrix> {
    if d * d != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: psi.dim(),
        });
    }
    partial_trace_pure(psi, d, d, Subsystem::A)
}

/// Eigenvalues of `H′(s)` in ascending order, for diagnostics.
pub fn path_spectrum(family: &AdiabaticFamily, s: f64) -> Result<Vec<f64>> {
    Ok(hermitian_eig(&family.interpolate(s).to_matrix()?)?.values)
}
