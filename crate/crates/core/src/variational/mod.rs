//! Free-energy objective `F(σ) = Tr(σH) − β⁻¹ S(σ) + λ·violation`, entropy and
//! energy estimators, optimizers and the end-to-end experiment driver.

mod experiment;
mod optimize;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::ansatz::{feasibility_projection, AnsatzCircuit, AnsatzConfig, AnsatzParameters};
use crate::circuits::{
    energy_probability, fourier_term_expectation, fourier_term_probability, sample_bernoulli,
    TermKind,
};
use crate::error::{Error, Result};
use crate::fourierlog::{build_log_series, CertifiedLogSeries};
use crate::hamiltonians::{AdiabaticFamily, LcuDecomposition, PauliSum};
use crate::numkernel::{kron, identity, ComplexMatrix, DensityMatrix, PureStateVector};

pub use experiment::{
    gibbs_probabilities_by_h0_rank, gibbs_spectrum, initial_parameters, run_experiment,
    ExperimentRecord, ExperimentResult, Init, OptimizerChoice, MAX_EXPERIMENT_QUBITS,
};
pub use optimize::{
    finite_diff_gradient, gradient_descent, powell_minimize, FnObjective, GradientDescentOptions,
    GradientEstimate, Objective, OptimizationTrace, PowellOptions, StopReason, TraceRecord,
    DEFAULT_FD_STEP, DEFAULT_TRACE_INTERVAL, GOLDEN_TOL, LINE_SEARCH_STEP,
};

/// Default weight `λ` of the feasibility penalty.
pub const DEFAULT_PENALTY_WEIGHT: f64 = 100.0;

/// Spectrum entries below `p_min` by more than this trigger the domain warning.
const SPECTRUM_SLACK: f64 = 1e-12;

/// `−Σ p ln p` over the spectrum, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho
        .spectrum()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    s.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    Exact,
    FourierExact,
    FourierShots,
}

/// How the Fourier terms are read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Exact expectations.
    Exact,
    /// Bernoulli sampling with the given shots per term; per-term seeds are
    /// derived from `seed`.
    Shots { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    /// The spectrum left `[p_min, 1]`, where the series carries no guarantee.
    pub below_p_min: bool,
    pub min_eigenvalue: f64,
}

/// Deterministic 64-bit mixing of a base seed with a sequence of tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `S̃(ρ) = −(c₀ + Σ_m b1_m Tr(ρ cos(ρ t_m)) + b2_m Tr(ρ sin(ρ t_m)))`.
///
/// The series approximates `ln p`; this is the only place the sign is applied.
pub fn entropy_fourier(rho: &DensityMatrix, series: &CertifiedLogSeries, readout: Readout) -> Result<EntropyEstimate> {
    if !series.certificate.passed {
        return Err(Error::Config(format!(
            "series for p_min={} eps={} failed its certificate",
            series.p_min, series.eps
        )));
    }
    let min_eigenvalue = rho.spectrum()[0];
    let below_p_min = min_eigenvalue < series.p_min - SPECTRUM_SLACK;
    if below_p_min {
        log::warn!(
            "spectrum reaches {min_eigenvalue:e}, below p_min={}; the series bound does not apply",
            series.p_min
        );
    }
    let s = &series.series;
    let mut acc = s.constant;
    for (m, ((&b1, &b2), &t)) in s.b1.iter().zip(&s.b2).zip(&s.t).enumerate() {
        let (c, sn) = match readout {
            Readout::Exact => (
                fourier_term_expectation(rho, t, TermKind::Cos),
                fourier_term_expectation(rho, t, TermKind::Sin),
            ),
            Readout::Shots { shots, seed } => {
                let term = |kind: TermKind, tag: u64| -> Result<f64> {
                    let p = fourier_term_probability(rho, t, kind.phase());
                    Ok(sample_bernoulli(p, shots, derive_seed(seed, &[m as u64, tag]))?.estimate)
                };
                (term(TermKind::Cos, 0)?, term(TermKind::Sin, 1)?)
            }
        };
        acc += b1 * c + b2 * sn;
    }
    Ok(EntropyEstimate {
        value: -acc,
        below_p_min,
        min_eigenvalue,
    })
}

/// `Tr(ρH)`.
pub fn average_energy(rho: &DensityMatrix, h: &PauliSum) -> Result<f64> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho.dim(),
        });
    }
    rho.expectation(&h.to_matrix()?)
}

/// `V_k ⊗ I` for every unitary, so the LCU acts on the system register of a purification.
pub fn lift_lcu(lcu: &LcuDecomposition, ancilla_dim: usize) -> LcuDecomposition {
    let id = identity(ancilla_dim);
    LcuDecomposition {
        alphas: lcu.alphas.clone(),
        unitaries: lcu.unitaries.iter().map(|v| kron(v, &id)).collect(),
        alpha_norm: lcu.alpha_norm,
    }
}

/// `‖α‖₁·(2·Pr(+1) − 1)` on a purification whose first factor is the system.
pub fn average_energy_purified(psi: &PureStateVector, lcu: &LcuDecomposition) -> Result<f64> {
    let d = lcu.dim();
    if d == 0 || !psi.dim().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: psi.dim(),
        });
    }
    let lifted = lift_lcu(lcu, psi.dim() / d);
    Ok(lcu.alpha_norm * (2.0 * energy_probability(psi, &lifted)? - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub beta: f64,
    #[serde(default = "default_penalty")]
    pub penalty_weight: f64,
    #[serde(default = "default_mode")]
    pub entropy_mode: EntropyMode,
    #[serde(default)]
    pub p_min: Option<f64>,
    #[serde(default)]
    pub series_eps: Option<f64>,
    #[serde(default = "default_shots")]
    pub shots_per_term: u64,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY_WEIGHT
}

fn default_mode() -> EntropyMode {
    EntropyMode::Exact
}

fn default_shots() -> u64 {
    1000
}

impl ObjectiveConfig {
    pub fn exact(beta: f64) -> Self {
        Self {
            beta,
            penalty_weight: DEFAULT_PENALTY_WEIGHT,
            entropy_mode: EntropyMode::Exact,
            p_min: None,
            series_eps: None,
            shots_per_term: default_shots(),
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.penalty_weight > 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::Config(format!(
                "penalty_weight must be positive, got {}",
                self.penalty_weight
            )));
        }
        if self.entropy_mode != EntropyMode::Exact {
            match (self.p_min, self.series_eps) {
                (Some(p), Some(e)) if p > 0.0 && p < 1.0 && e > 0.0 => {}
                _ => {
                    return Err(Error::Config(
                        "Fourier entropy modes need p_min in (0, 1) and series_eps > 0".into(),
                    ))
                }
            }
            if self.entropy_mode == EntropyMode::FourierShots && self.shots_per_term == 0 {
                return Err(Error::Config("shots_per_term must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Free energy of the ansatz state as a function of the flat vector
/// `[φ_1..φ_r, p_1..p_{D−1}]`.
pub struct FreeEnergyObjective {
    circuit: AnsatzCircuit,
    h: ComplexMatrix,
    config: ObjectiveConfig,
    series: Option<CertifiedLogSeries>,
    evals: AtomicU64,
}

/// Components of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub violation: f64,
    pub state: DensityMatrix,
}

impl FreeEnergyObjective {
    pub fn new(family: &AdiabaticFamily, acfg: AnsatzConfig, ocfg: ObjectiveConfig) -> Result<Self> {
        ocfg.validate()?;
        let series = match ocfg.entropy_mode {
            EntropyMode::Exact => None,
            _ => {
                let (p_min, eps) = (ocfg.p_min.unwrap(), ocfg.series_eps.unwrap());
                Some(build_log_series(p_min, eps).map_err(|e| Error::Config(e.to_string()))?)
            }
        };
        Ok(Self {
            circuit: AnsatzCircuit::new(family, acfg)?,
            h: family.target().to_matrix()?,
            config: ocfg,
            series,
            evals: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.config
    }

    pub fn ansatz(&self) -> &AnsatzConfig {
        self.circuit.config()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn series(&self) -> Option<&CertifiedLogSeries> {
        self.series.as_ref()
    }

    /// Calls made through [`free_energy`](Self::free_energy) and [`Objective::value`].
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// State prepared by the projected parameters.
    pub fn state(&self, params: &AnsatzParameters) -> Result<DensityMatrix> {
        let (feasible, _) = feasibility_projection(params);
        self.circuit.reduced_state(&feasible)
    }

    pub fn evaluate(&self, params: &AnsatzParameters, eval_index: u64) -> Result<Evaluation> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let (feasible, violation) = feasibility_projection(params);
        let state = self.circuit.reduced_state(&feasible)?;
        let energy = state.expectation(&self.h)?;
        let entropy = match (self.config.entropy_mode, &self.series) {
            (EntropyMode::Exact, _) => von_neumann_entropy(&state),
            (EntropyMode::FourierExact, Some(s)) => entropy_fourier(&state, s, Readout::Exact)?.value,
            (EntropyMode::FourierShots, Some(s)) => {
                let readout = Readout::Shots {
                    shots: self.config.shots_per_term,
                    seed: derive_seed(self.config.base_seed, &[eval_index]),
                };
                entropy_fourier(&state, s, readout)?.value
            }
            _ => return Err(Error::Config("entropy series missing".into())),
        };
        let free_energy = energy - entropy / self.config.beta + self.config.penalty_weight * violation;
        Ok(Evaluation {
            free_energy,
            energy,
            entropy,
            violation,
            state,
        })
    }

    pub fn free_energy(&self, params: &AnsatzParameters, eval_index: u64) -> Result<f64> {
        Ok(self.evaluate(params, eval_index)?.free_energy)
    }
}

impl Objective for FreeEnergyObjective {
    fn dim(&self) -> usize {
        self.ansatz().num_params()
    }

    fn value(&self, x: &[f64], eval_index: u64) -> Result<f64> {
        let params = AnsatzParameters::from_flat(x, self.ansatz().r)?;
        self.free_energy(&params, eval_index)
    }
}
