//! End-to-end Gibbs-state preparation: initialize, optimize, and score each
//! trace record against the exact Gibbs state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{
    gradient_descent, powell_minimize, GradientDescentOptions, PowellOptions, StopReason,
};
use super::{FreeEnergyObjective, ObjectiveConfig};
use crate::ansatz::{feasibility_projection, AnsatzConfig, AnsatzParameters};
use crate::error::{Error, Result};
use crate::hamiltonians::{gibbs_free_energy_of_matrix, gibbs_state_of_matrix, AdiabaticFamily};
use crate::numkernel::{hermitian_eig, random_spectrum, trace_distance, DensityMatrix};

/// Largest qubit count for which the experiment computes Gibbs-state metrics.
pub const MAX_EXPERIMENT_QUBITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// Gibbs probabilities plus Gaussian noise of standard deviation `sigma`,
    /// and a linear path plus the same noise on each `φ_k`.
    PerturbedTruth { sigma: f64 },
    /// Flat-Dirichlet probabilities and a linear path with unit Gaussian noise.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerChoice {
    Powell {
        #[serde(default = "default_ftol")]
        ftol: f64,
        max_evals: u64,
    },
    GradientDescent {
        rate: f64,
        iters: usize,
        #[serde(default)]
        tol: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_ftol() -> f64 {
    1e-10
}

fn default_delta() -> f64 {
    super::DEFAULT_FD_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub evals: u64,
    pub best_f: f64,
    pub delta_f: f64,
    pub trace_distance: f64,
    pub params: AnsatzParameters,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub f_gibbs: f64,
    pub initial_params: AnsatzParameters,
    pub records: Vec<ExperimentRecord>,
    pub evals_used: u64,
    pub stop: StopReason,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub final_state: DensityMatrix,
}

impl ExperimentResult {
    pub fn last(&self) -> &ExperimentRecord {
        self.records.last().expect("an experiment records at least one evaluation")
    }

    pub fn final_delta_f(&self) -> f64 {
        self.last().delta_f
    }

    pub fn final_trace_distance(&self) -> f64 {
        self.last().trace_distance
    }
}

/// Gibbs probabilities of the target Hamiltonian, indexed by computational basis
/// state: the state with the `k`-th lowest `H0` diagonal energy receives the
/// `k`-th largest Gibbs probability. Ties keep index order.
pub fn gibbs_probabilities_by_h0_rank(family: &AdiabaticFamily, beta: f64) -> Result<Vec<f64>> {
    let h = family.target().to_matrix()?;
    let gibbs = gibbs_state_of_matrix(&h, beta)?;
    let mut desc = gibbs.spectrum().to_vec();
    desc.reverse();
    let h0 = family.h0.to_matrix()?;
    let mut order: Vec<usize> = (0..h0.nrows()).collect();
    order.sort_by(|&i, &j| h0[(i, i)].re.total_cmp(&h0[(j, j)].re));
    let mut probs = vec![0.0; order.len()];
    for (rank, &j) in order.iter().enumerate() {
        probs[j] = desc[rank];
    }
    Ok(probs)
}

/// Starting point for the optimizer. Noise draws come from `seed`, probabilities first.
pub fn initial_parameters(
    family: &AdiabaticFamily,
    acfg: &AnsatzConfig,
    beta: f64,
    init: Init,
    seed: u64,
) -> Result<AnsatzParameters> {
    let d = acfg.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (probs, phi_noise) = match init {
        Init::PerturbedTruth { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::validation(format!("sigma must be >= 0, got {sigma}")));
            }
            let truth = gibbs_probabilities_by_h0_rank(family, beta)?;
            let probs: Vec<f64> = truth[..d - 1]
                .iter()
                .map(|p| p + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (probs, sigma)
        }
        Init::Random => (random_spectrum(d, 0.0, &mut rng)?[..d - 1].to_vec(), 1.0),
    };
    let r = acfg.r;
    let phi = (1..=r)
        .map(|k| (k as f64 / (r + 1) as f64).atanh() + phi_noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (projected, _) = feasibility_projection(&AnsatzParameters { phi, probs });
    Ok(projected)
}

/// Optimizes the free energy from the chosen initialization and reports
/// `ΔF = best_F − F_gibbs` and the trace distance to the Gibbs state per record.
pub fn run_experiment(
    family: &AdiabaticFamily,
    acfg: &AnsatzConfig,
    ocfg: &ObjectiveConfig,
    init: Init,
    optimizer: OptimizerChoice,
    seed: u64,
    interval: u64,
) -> Result<ExperimentResult> {
    if family.n() > MAX_EXPERIMENT_QUBITS {
        return Err(Error::Resource(format!(
            "experiments need the dense Gibbs state; {} qubits exceeds {MAX_EXPERIMENT_QUBITS}",
            family.n()
        )));
    }
    let obj = FreeEnergyObjective::new(family, acfg.clone(), ocfg.clone())?;
    let h = obj.hamiltonian().clone();
    let gibbs = gibbs_state_of_matrix(&h, ocfg.beta)?;
    let f_gibbs = gibbs_free_energy_of_matrix(&h, ocfg.beta)?;
    let initial_params = initial_parameters(family, acfg, ocfg.beta, init, seed)?;
    let x0 = initial_params.to_flat();
    let trace = match optimizer {
        OptimizerChoice::Powell { ftol, max_evals } => {
            powell_minimize(&obj, &x0, PowellOptions { ftol, max_evals }, interval)?
        }
        OptimizerChoice::GradientDescent { rate, iters, tol, delta } => gradient_descent(
            &obj,
            &x0,
            GradientDescentOptions { rate, iters, tol, delta },
            interval,
        )?,
    };
    let records = trace
        .records
        .par_iter()
        .map(|rec| {
            let params = AnsatzParameters::from_flat(&rec.best_x, acfg.r)?;
            let state = obj.state(&params)?;
            Ok(ExperimentRecord {
                evals: rec.evals,
                best_f: rec.best_f,
                delta_f: rec.best_f - f_gibbs,
                trace_distance: trace_distance(&state, &gibbs)?,
                params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let final_params = AnsatzParameters::from_flat(&trace.best_x, acfg.r)?;
    let final_state = obj.state(&final_params)?;
    Ok(ExperimentResult {
        f_gibbs,
        initial_params,
        records,
        evals_used: trace.evals_used,
        stop: trace.stop,
        notes: trace.notes,
        final_state,
    })
}

/// Eigenvalues of the Gibbs state, descending.
pub fn gibbs_spectrum(family: &AdiabaticFamily, beta: f64) -> Result<Vec<f64>> {
    let g = gibbs_state_of_matrix(&family.target().to_matrix()?, beta)?;
    let mut v = hermitian_eig(g.matrix())?.values;
    v.reverse();
    Ok(v)
}
