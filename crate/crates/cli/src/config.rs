//! Experiment configuration file for `prepare-gibbs`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vargibbs_core::ansatz::AnsatzConfig;
use vargibbs_core::hamiltonians::{random_instance, AdiabaticFamily, Coupling};
use vargibbs_core::variational::{
    EntropyMode, Init, ObjectiveConfig, OptimizerChoice, DEFAULT_PENALTY_WEIGHT,
    DEFAULT_TRACE_INTERVAL, MAX_EXPERIMENT_QUBITS,
};

use crate::commands::InstanceFile;
use crate::CliError;

/// Where the Hamiltonian family comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// Seeded random instance; `seed` defaults to the experiment seed.
    Random {
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        coupling: Coupling,
    },
    /// JSON file `{seed?, coupling?, h0, h1}` as written by the `instance` command.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trace_csv: PathBuf,
    pub trace_json: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub beta: f64,
    pub r: usize,
    pub total_time: f64,
    #[serde(default = "one")]
    pub segment_substeps: usize,
    #[serde(default = "exact_mode")]
    pub entropy_mode: EntropyMode,
    #[serde(default)]
    pub p_min: Option<f64>,
    #[serde(default)]
    pub series_eps: Option<f64>,
    #[serde(default = "default_shots")]
    pub shots_per_term: u64,
    #[serde(default = "default_penalty")]
    pub penalty_weight: f64,
    pub optimizer: OptimizerChoice,
    pub init: Init,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_interval")]
    pub trace_interval: u64,
    pub output: OutputPaths,
}

fn one() -> usize {
    1
}

fn exact_mode() -> EntropyMode {
    EntropyMode::Exact
}

fn default_shots() -> u64 {
    1000
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY_WEIGHT
}

fn default_interval() -> u64 {
    DEFAULT_TRACE_INTERVAL
}

/// A validated configuration with its seed and instance resolved.
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub family: AdiabaticFamily,
    pub ansatz: AnsatzConfig,
    pub objective: ObjectiveConfig,
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InstanceSpec::File { path } = &mut cfg.instance {
            rebase(path);
        }
        rebase(&mut cfg.output.trace_csv);
        rebase(&mut cfg.output.trace_json);
        rebase(&mut cfg.output.summary);
        Ok(cfg)
    }

    /// Checks every field, fills in the seed and builds the instance. Nothing
    /// expensive runs here.
    pub fn resolve(mut self, generated_seed: impl FnOnce() -> u64) -> Result<ResolvedExperiment, CliError> {
        let seed = *self.seed.get_or_insert_with(generated_seed);
        let family = match &self.instance {
            InstanceSpec::Random { n, seed: s, coupling } => {
                check_qubits(*n)?;
                random_instance(*n, s.unwrap_or(seed), *coupling)?
            }
            InstanceSpec::File { path } => load_family(path)?,
        };
        check_qubits(family.n())?;
        let ansatz = AnsatzConfig {
            n: family.n(),
            r: self.r,
            total_time: self.total_time,
            segment_substeps: self.segment_substeps,
        };
        ansatz.validate()?;
        let objective = ObjectiveConfig {
            beta: self.beta,
            penalty_weight: self.penalty_weight,
            entropy_mode: self.entropy_mode,
            p_min: self.p_min,
            series_eps: self.series_eps,
            shots_per_term: self.shots_per_term,
            base_seed: seed,
        };
        objective.validate()?;
        if self.trace_interval == 0 {
            return Err(CliError::Validation("trace_interval must be at least 1".into()));
        }
        match self.init {
            Init::PerturbedTruth { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(CliError::Validation(format!("init sigma must be non-negative, got {sigma}")));
            }
            _ => {}
        }
        let dim = ansatz.num_params() as u64;
        match self.optimizer {
            OptimizerChoice::Powell { ftol, max_evals } => {
                if !(ftol >= 0.0 && ftol.is_finite()) {
                    return Err(CliError::Validation(format!("ftol must be non-negative, got {ftol}")));
                }
                if max_evals < dim + 1 {
                    return Err(CliError::Validation(format!(
                        "max_evals must be at least {} for {dim} parameters",
                        dim + 1
                    )));
                }
            }
            OptimizerChoice::GradientDescent { rate, iters, tol, delta } => {
                if !(rate > 0.0 && rate.is_finite()) || iters == 0 || !(tol >= 0.0) || !(delta > 0.0) {
                    return Err(CliError::Validation(
                        "gradient descent needs rate > 0, iters >= 1, tol >= 0 and delta > 0".into(),
                    ));
                }
            }
        }
        let o = &self.output;
        if o.trace_csv == o.trace_json || o.trace_csv == o.summary || o.trace_json == o.summary {
            return Err(CliError::Validation("output paths must be distinct".into()));
        }
        Ok(ResolvedExperiment {
            config: self,
            seed,
            family,
            ansatz,
            objective,
        })
    }
}

fn check_qubits(n: usize) -> Result<(), CliError> {
    if n == 0 || n > MAX_EXPERIMENT_QUBITS {
        return Err(CliError::Validation(format!(
            "instance needs 1..={MAX_EXPERIMENT_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

/// Reads an instance file and re-checks that both halves agree.
pub fn load_family(path: &Path) -> Result<AdiabaticFamily, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let raw: InstanceFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("instance {}: {e}", path.display())))?;
    Ok(AdiabaticFamily::new(raw.h0, raw.h1)?)
}
